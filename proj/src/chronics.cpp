#include "gridrl/chronics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gridrl/rng.hpp"

namespace fs = std::filesystem;

namespace gridrl {

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        // trim surrounding whitespace
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

Eigen::MatrixXd read_profile_csv(const fs::path& path, int expected_cols, const char* what) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("chronics: cannot open " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("chronics: " + path.string() + " is empty");
    const auto header = split_csv_row(line);
    if (static_cast<int>(header.size()) != expected_cols)
        throw std::runtime_error("chronics: " + path.string() + " has " +
                                 std::to_string(header.size()) + " columns, grid expects " +
                                 std::to_string(expected_cols) + " " + what + " columns");
    for (int c = 0; c < expected_cols; ++c) {
        const std::string want = std::string(what) + "_" + std::to_string(c);
        if (header[c] != want)
            throw std::runtime_error("chronics: " + path.string() + " column " +
                                     std::to_string(c) + " is '" + header[c] + "', expected '" +
                                     want + "'");
    }

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_row(line);
        if (static_cast<int>(cells.size()) != expected_cols)
            throw std::runtime_error("chronics: " + path.string() + ":" + std::to_string(line_no) +
                                     " has " + std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(expected_cols));
        std::vector<double> row(expected_cols);
        for (int c = 0; c < expected_cols; ++c) {
            try {
                size_t pos = 0;
                row[c] = std::stod(cells[c], &pos);
                if (pos != cells[c].size()) throw std::invalid_argument("trailing junk");
            } catch (const std::exception&) {
                throw std::runtime_error("chronics: " + path.string() + ":" +
                                         std::to_string(line_no) + " cell " + std::to_string(c) +
                                         " is not a number: '" + cells[c] + "'");
            }
            if (!std::isfinite(row[c]))
                throw std::runtime_error("chronics: " + path.string() + ":" +
                                         std::to_string(line_no) + " cell " + std::to_string(c) +
                                         " is not finite");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("chronics: " + path.string() + " has no data rows");

    Eigen::MatrixXd m(static_cast<int>(rows.size()), expected_cols);
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < expected_cols; ++c) m(r, c) = rows[r][c];
    return m;
}

void write_profile_csv(const fs::path& path, const Eigen::MatrixXd& m, const char* what) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("chronics: cannot write " + path.string());
    for (int c = 0; c < m.cols(); ++c) out << (c ? "," : "") << what << "_" << c;
    out << "\n";
    out.precision(17);
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            if (c) out << ",";
            out << m(r, c);
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("chronics: write failed for " + path.string());
}

} // namespace

Chronic load_chronic(const std::string& dir, const Grid& grid) {
    const fs::path root(dir);
    if (!fs::is_directory(root))
        throw std::runtime_error("chronics: '" + dir + "' is not a directory");
    Chronic c;
    c.id = root.filename().string();
    c.gen_p = read_profile_csv(root / "gen_p.csv", grid.num_generators(), "gen");
    c.load_p = read_profile_csv(root / "load_p.csv", grid.num_loads(), "load");
    if (c.gen_p.rows() != c.load_p.rows())
        throw std::runtime_error("chronic '" + c.id + "': gen_p has " +
                                 std::to_string(c.gen_p.rows()) + " rows but load_p has " +
                                 std::to_string(c.load_p.rows()));
    if (c.horizon() > kMaxHorizon)
        throw std::runtime_error("chronic '" + c.id + "': horizon " +
                                 std::to_string(c.horizon()) + " exceeds limit " +
                                 std::to_string(kMaxHorizon));
    for (int t = 0; t < c.gen_p.rows(); ++t)
        for (int g = 0; g < c.gen_p.cols(); ++g)
            if (c.gen_p(t, g) < -1e-9 || c.gen_p(t, g) > grid.generators()[g].p_max + 1e-9)
                throw std::runtime_error("chronic '" + c.id + "': gen " + std::to_string(g) +
                                         " at step " + std::to_string(t) + " dispatch " +
                                         std::to_string(c.gen_p(t, g)) +
                                         " outside [0, p_max]");
    for (int t = 0; t < c.load_p.rows(); ++t)
        for (int d = 0; d < c.load_p.cols(); ++d)
            if (c.load_p(t, d) < -1e-9)
                throw std::runtime_error("chronic '" + c.id + "': load " + std::to_string(d) +
                                         " at step " + std::to_string(t) + " is negative");
    return c;
}

std::vector<Chronic> load_chronics(const std::string& dir, const Grid& grid) {
    const fs::path root(dir);
    if (!fs::is_directory(root))
        throw std::runtime_error("chronics: '" + dir + "' is not a directory");
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::exists(entry.path() / "gen_p.csv"))
            subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());
    if (subdirs.empty())
        throw std::runtime_error("chronics: no chronic folders under '" + dir + "'");
    std::vector<Chronic> out;
    out.reserve(subdirs.size());
    for (const auto& sub : subdirs) out.push_back(load_chronic(sub.string(), grid));
    return out;
}

void save_chronic(const std::string& dir, const Chronic& chronic) {
    const fs::path root = fs::path(dir) / chronic.id;
    fs::create_directories(root);
    write_profile_csv(root / "gen_p.csv", chronic.gen_p, "gen");
    write_profile_csv(root / "load_p.csv", chronic.load_p, "load");
}

Chronic generate_synthetic(const Grid& grid, std::uint64_t seed, const SyntheticProfile& profile) {
    if (profile.horizon < 1 || profile.horizon > kMaxHorizon)
        throw std::invalid_argument("generate_synthetic: horizon " +
                                    std::to_string(profile.horizon) + " outside [1, " +
                                    std::to_string(kMaxHorizon) + "]");
    const int T = profile.horizon;
    const int G = grid.num_generators();
    const int D = grid.num_loads();
    const double total_pmax = grid.total_gen_capacity();

    Rng weight_rng = Rng::fork(seed, "chronic/weights");
    Rng load_rng = Rng::fork(seed, "chronic/load_noise");
    Rng gen_rng = Rng::fork(seed, "chronic/gen_noise");

    // Per-load share of system demand, fixed for the whole chronic.
    std::vector<double> share(D);
    double share_sum = 0.0;
    for (int d = 0; d < D; ++d) {
        share[d] = 0.35 + 0.65 * weight_rng.uniform();
        share_sum += share[d];
    }
    for (double& s : share) s /= share_sum;

    // System peak demand at peak_scale = 1 leaves dispatch headroom.
    const double peak_total = 0.62 * total_pmax * profile.peak_scale;

    // The leading non-slack generators act as weather-driven units.
    const int slack = grid.slack_gen();
    std::vector<int> renewables, dispatchables;
    const int renewable_target =
        std::min(G - 1, static_cast<int>(std::lround(profile.renewable_share * G)));
    for (int g = 0; g < G && static_cast<int>(renewables.size()) < renewable_target; ++g)
        if (g != slack) renewables.push_back(g);
    for (int g = 0; g < G; ++g)
        if (g != slack && std::find(renewables.begin(), renewables.end(), g) == renewables.end())
            dispatchables.push_back(g);

    std::vector<double> phase(renewables.size());
    for (auto& p : phase) p = 2.0 * M_PI * weight_rng.uniform();

    Chronic c;
    c.id = "synthetic-" + std::to_string(seed);
    c.gen_p = Eigen::MatrixXd::Zero(T, G);
    c.load_p = Eigen::MatrixXd::Zero(T, D);

    // Smooth mean-reverting disturbances, one stream per load and per
    // renewable unit, so overloads persist across neighbouring steps.
    std::vector<double> load_ou(D, 0.0);
    std::vector<double> gen_ou(renewables.size(), 0.0);
    constexpr double kOuKeep = 0.92;
    const double ou_drive = std::sqrt(1.0 - kOuKeep * kOuKeep);

    for (int t = 0; t < T; ++t) {
        const double day_frac =
            static_cast<double>(t % profile.steps_per_day) / profile.steps_per_day;
        // Daily demand curve: overnight plateau rising to an afternoon peak.
        const double bump = std::exp(-0.5 * std::pow((day_frac - 0.58) / 0.17, 2.0));
        const double shape = profile.base_level + (1.0 - profile.base_level) * bump;

        double total_load = 0.0;
        for (int d = 0; d < D; ++d) {
            load_ou[d] = kOuKeep * load_ou[d] + ou_drive * load_rng.normal();
            const double factor =
                std::max(0.05, shape * (1.0 + profile.noise_level * load_ou[d]));
            c.load_p(t, d) = peak_total * share[d] * factor;
            total_load += c.load_p(t, d);
        }

        // Weather-driven units follow their own daily cycle.
        double committed = 0.0;
        for (size_t i = 0; i < renewables.size(); ++i) {
            gen_ou[i] = kOuKeep * gen_ou[i] + ou_drive * gen_rng.normal();
            const int g = renewables[i];
            double frac = 0.42 + 0.22 * std::sin(2.0 * M_PI * day_frac + phase[i]) +
                          0.12 * gen_ou[i];
            frac = std::clamp(frac, 0.03, 0.92);
            double p = frac * grid.generators()[g].p_max;
            p = std::min(p, std::max(0.0, total_load - committed));
            c.gen_p(t, g) = p;
            committed += p;
        }

        // Dispatchable units split the residual in proportion to capacity,
        // the slack unit last so it absorbs rounding.
        double residual = total_load - committed;
        double disp_cap = 0.0;
        for (int g : dispatchables) disp_cap += grid.generators()[g].p_max;
        const double slack_cap = grid.generators()[slack].p_max;
        // Aim to keep the slack near half output so the tolerance band has
        // room in both directions during episodes.
        double slack_share = std::clamp(0.5 * slack_cap, 0.0, residual);
        if (disp_cap < residual - slack_share) slack_share = residual - disp_cap;
        slack_share = std::clamp(slack_share, 0.0, std::min(slack_cap, residual));
        double disp_total = residual - slack_share;
        for (int g : dispatchables) {
            double p = disp_cap > 0.0 ? disp_total * grid.generators()[g].p_max / disp_cap : 0.0;
            p = std::clamp(p, 0.0, grid.generators()[g].p_max);
            c.gen_p(t, g) = p;
            committed += p;
        }
        c.gen_p(t, slack) = std::clamp(total_load - committed, 0.0, slack_cap);
        committed += c.gen_p(t, slack);

        // If every unit saturated, shed load proportionally so the row
        // still balances exactly.
        if (committed < total_load - 1e-12 && total_load > 0.0) {
            const double shrink = committed / total_load;
            for (int d = 0; d < D; ++d) c.load_p(t, d) *= shrink;
        }
    }
    return c;
}

} // namespace gridrl

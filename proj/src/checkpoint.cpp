#include "gridrl/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace gridrl {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'L', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in, const std::string& path, const char* what) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error(path + ": truncated checkpoint (" + what + ")");
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const std::vector<Tensor*>& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");

    out.write(kMagic, sizeof kMagic);
    write_u64(out, params.size());
    for (const Tensor* p : params) {
        write_u64(out, static_cast<std::uint64_t>(p->value.rows()));
        write_u64(out, static_cast<std::uint64_t>(p->value.cols()));
        // Eigen's native column-major layout, doubles.
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    out.flush();
    if (!out) throw std::runtime_error(path + ": write failed");
}

void load_checkpoint(const std::string& path, const std::vector<Tensor*>& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");

    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error(path + ": not a checkpoint file");

    const std::uint64_t count = read_u64(in, path, "tensor count");
    if (count != params.size())
        throw std::runtime_error(path + ": holds " + std::to_string(count) +
                                 " tensors, layout expects " + std::to_string(params.size()));

    // Stage into temporaries so a truncated file leaves params untouched.
    std::vector<Eigen::MatrixXd> staged(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto rows = read_u64(in, path, "shape");
        const auto cols = read_u64(in, path, "shape");
        const Tensor* p = params[i];
        if (rows != static_cast<std::uint64_t>(p->value.rows()) ||
            cols != static_cast<std::uint64_t>(p->value.cols()))
            throw std::runtime_error(path + ": tensor " + std::to_string(i) + " is " +
                                     std::to_string(rows) + "x" + std::to_string(cols) +
                                     ", layout expects " + std::to_string(p->value.rows()) +
                                     "x" + std::to_string(p->value.cols()));
        staged[i].resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        in.read(reinterpret_cast<char*>(staged[i].data()),
                static_cast<std::streamsize>(sizeof(double) * staged[i].size()));
        if (!in)
            throw std::runtime_error(path + ": truncated checkpoint (tensor " +
                                     std::to_string(i) + ")");
    }
    if (in.peek() != std::ifstream::traits_type::eof())
        throw std::runtime_error(path + ": trailing bytes after last tensor");

    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = std::move(staged[i]);
}

} // namespace gridrl

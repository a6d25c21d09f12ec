#pragma once

#include <string>
#include <vector>

#include "gridrl/nn.hpp"

namespace gridrl {

/// Write every tensor's values to `path` as sized binary blocks. The file
/// starts with a magic tag and the tensor count; each block records its
/// shape, so load can verify the layout it restores into.
void save_checkpoint(const std::string& path, const std::vector<Tensor*>& params);

/// Restore values written by save_checkpoint into `params`. Throws
/// std::runtime_error when the file is not a checkpoint, is truncated, or
/// its tensor count or any shape disagrees with the current layout.
void load_checkpoint(const std::string& path, const std::vector<Tensor*>& params);

} // namespace gridrl

#pragma once

// Checkpoint file layout:
//   STGCKPT 1
//   <name>,<rank>,<dim>,<dim>...     one manifest line per parameter
//   end
//   <one STGT tensor record per parameter, manifest order>

#include <filesystem>

#include "stgcgrn/model.hpp"

namespace stgcgrn::checkpoint {

void save(const std::filesystem::path& path, const model::ModelState& state);

// Loads into `state`, whose parameter names and shapes must match the file.
void load(const std::filesystem::path& path, model::ModelState& state);

}  // namespace stgcgrn::checkpoint

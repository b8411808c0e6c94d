#include "stgcgrn/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "stgcgrn/errors.hpp"
#include "stgcgrn/tensor_io.hpp"

namespace stgcgrn::checkpoint {
namespace {
constexpr const char* kHeader = "STGCKPT 1";
}

void save(const std::filesystem::path& path, const model::ModelState& state) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  const auto params = state.named_parameters();
  os << kHeader << '\n';
  for (const auto& [name, t] : params) {
    os << name << ',' << t.rank();
    for (auto d : t.shape()) os << ',' << d;
    os << '\n';
  }
  os << "end\n";
  for (const auto& [name, t] : params) io::write_tensor(os, t);
  if (!os) throw DataError("write failed for checkpoint " + path.string());
}

void load(const std::filesystem::path& path, model::ModelState& state) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kHeader) throw DataError(path.string() + ": not a checkpoint file");

  auto params = state.named_parameters();
  std::size_t index = 0;
  while (std::getline(is, line) && line != "end") {
    std::istringstream ls(line);
    std::string name, field;
    std::getline(ls, name, ',');
    Shape dims;
    std::getline(ls, field, ',');
    const std::size_t rank = std::stoul(field);
    while (std::getline(ls, field, ',')) dims.push_back(std::stoul(field));
    if (dims.size() != rank) throw DataError(path.string() + ": malformed manifest line '" + line + "'");
    if (index >= params.size() || params[index].first != name)
      throw ShapeError("checkpoint parameter '" + name + "' does not match the configured model");
    if (params[index].second.shape() != dims)
      throw ShapeError("checkpoint parameter '" + name + "' has shape " + shape_str(dims) + ", config expects " +
                       shape_str(params[index].second.shape()));
    ++index;
  }
  if (line != "end") throw DataError(path.string() + ": manifest not terminated");
  if (index != params.size())
    throw ShapeError("checkpoint holds " + std::to_string(index) + " parameters, model has " +
                     std::to_string(params.size()));
  for (auto& [name, t] : params) {
    const Tensor loaded = io::read_tensor(is, static_cast<std::uint64_t>(is.tellg()));
    if (loaded.shape() != t.shape()) throw DataError(path.string() + ": payload shape mismatch for '" + name + "'");
    auto dst = t.mutable_values();
    std::copy(loaded.values().begin(), loaded.values().end(), dst.begin());
  }
}

}  // namespace stgcgrn::checkpoint

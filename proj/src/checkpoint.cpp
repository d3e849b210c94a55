#include "equifm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace equifm {

namespace {

constexpr std::array<char, 8> kMagic{'E', 'Q', 'F', 'M', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& source) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw CheckpointError(source + ": truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const VectorFieldModel& model, const FeatureLayout& layout, const std::filesystem::path& path) {
  if (layout.dim() != model.dims().feature_dim)
    throw CheckpointError("feature layout width " + std::to_string(layout.dim()) + " does not match model width " +
                          std::to_string(model.dims().feature_dim));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.dims().n_layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.dims().hidden));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.dims().feature_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(kTimeEmbeddingWidth));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layout.symbols.size()));
  for (const std::string& s : layout.symbols) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  put<std::uint8_t>(out, layout.charge_channel ? 1 : 0);
  put<std::uint64_t>(out, model.seed());
  put<std::uint64_t>(out, static_cast<std::uint64_t>(model.parameters().size()));
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i) put<double>(out, model.parameters()[i]);
  if (!out) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string src = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + src);
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw CheckpointError(src + ": not an equifm checkpoint");
  const auto version = get<std::uint32_t>(in, src);
  if (version != kCheckpointVersion)
    throw CheckpointError(src + ": unsupported checkpoint version " + std::to_string(version));
  ModelDims dims;
  dims.n_layers = static_cast<int>(get<std::uint32_t>(in, src));
  dims.hidden = static_cast<int>(get<std::uint32_t>(in, src));
  dims.feature_dim = static_cast<int>(get<std::uint32_t>(in, src));
  const auto temb = get<std::uint32_t>(in, src);
  if (temb != static_cast<std::uint32_t>(kTimeEmbeddingWidth))
    throw CheckpointError(src + ": time-embedding width " + std::to_string(temb) + " is not supported");
  FeatureLayout layout;
  layout.symbols.clear();
  const auto n_symbols = get<std::uint32_t>(in, src);
  if (n_symbols > 128) throw CheckpointError(src + ": implausible symbol count");
  for (std::uint32_t k = 0; k < n_symbols; ++k) {
    const auto len = get<std::uint8_t>(in, src);
    std::string s(len, '\0');
    if (!in.read(s.data(), len)) throw CheckpointError(src + ": truncated checkpoint");
    layout.symbols.push_back(s);
  }
  layout.charge_channel = get<std::uint8_t>(in, src) != 0;
  const auto seed = get<std::uint64_t>(in, src);
  const auto count = get<std::uint64_t>(in, src);
  if (layout.dim() != dims.feature_dim)
    throw CheckpointError(src + ": feature layout width " + std::to_string(layout.dim()) +
                          " does not match feature_dim " + std::to_string(dims.feature_dim));
  if (count != parameter_count(dims))
    throw CheckpointError(src + ": parameter count " + std::to_string(count) + " does not match dimensions");
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = get<double>(in, src);
  if (!params.allFinite()) throw CheckpointError(src + ": checkpoint contains non-finite parameters");
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(src + ": trailing bytes after the parameters");
  return {VectorFieldModel::from_parameters(dims, seed, std::move(params)), layout};
}

}  // namespace equifm

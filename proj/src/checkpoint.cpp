#include "dvnee/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace dvnee {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

namespace {

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError("checkpoint truncated");
  return v;
}

std::string get_string(std::istream& in, std::uint64_t limit) {
  const auto n = get_u64(in);
  if (n > limit) throw CheckpointError("checkpoint string length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace

const Tensor2* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void write_checkpoint(const std::string& path, const std::string& metadata, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out.write(Checkpoint::kMagic, sizeof Checkpoint::kMagic);
  const std::uint32_t version = Checkpoint::kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  put_u64(out, metadata.size());
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  put_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t->rows());
    put_u64(out, t->cols());
    out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  char magic[sizeof Checkpoint::kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, Checkpoint::kMagic, sizeof magic) != 0) {
    throw CheckpointError("'" + path + "' is not a checkpoint file");
  }
  std::uint32_t version = 0;
  if (!in.read(reinterpret_cast<char*>(&version), sizeof version)) throw CheckpointError("checkpoint truncated");
  if (version != Checkpoint::kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.metadata = get_string(in, 1u << 26);
  const auto count = get_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = get_string(in, 4096);
    const auto rows = get_u64(in);
    const auto cols = get_u64(in);
    if (rows * cols > (1ull << 32)) throw CheckpointError("tensor '" + name + "' is implausibly large");
    std::vector<double> data(rows * cols);
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw CheckpointError("checkpoint truncated in tensor '" + name + "'");
    }
    ck.tensors.emplace_back(std::move(name), Tensor2(rows, cols, std::move(data)));
  }
  return ck;
}

void load_tensors(const Checkpoint& ck, const NamedTensors& into) {
  for (const auto& [name, t] : into) {
    const Tensor2* src = ck.find(name);
    if (src == nullptr) throw CheckpointError("checkpoint has no tensor '" + name + "'");
    if (!src->same_shape(*t)) {
      throw CheckpointError("tensor '" + name + "' has shape " + shape_string(*src) + ", expected " + shape_string(*t));
    }
    *t = *src;
  }
}

}  // namespace dvnee

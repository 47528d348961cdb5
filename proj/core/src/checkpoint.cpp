#include "kbqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include <fmt/format.h>

namespace kbqa {
namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff),
                         static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff),
                         static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw CheckpointError("truncated checkpoint");
  }
  return static_cast<std::uint32_t>(bytes[0]) |
         (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void put_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (const float v : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

struct Record {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;
};

std::map<std::string, Record> get_block(std::istream& in) {
  std::map<std::string, Record> block;
  const auto count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_u32(in);
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw CheckpointError("truncated name");
    Record rec;
    rec.rows = get_u32(in);
    rec.cols = get_u32(in);
    rec.data.resize(rec.rows * rec.cols);
    for (auto& v : rec.data) v = std::bit_cast<float>(get_u32(in));
    block.emplace(std::move(name), std::move(rec));
  }
  return block;
}

void restore(const std::map<std::string, Record>& block, Parameter& p,
             Matrix& target, std::string_view what) {
  const auto it = block.find(p.name);
  if (it == block.end()) {
    throw CheckpointError(
        fmt::format("checkpoint has no {} for '{}'", what, p.name));
  }
  const auto& rec = it->second;
  if (rec.rows != p.value.rows() || rec.cols != p.value.cols()) {
    throw CheckpointError(fmt::format(
        "shape mismatch for '{}': checkpoint {}x{}, model {}x{}", p.name,
        rec.rows, rec.cols, p.value.rows(), p.value.cols()));
  }
  Matrix m(rec.rows, rec.cols);
  std::copy(rec.data.begin(), rec.data.end(), m.data().begin());
  if (!m.all_finite()) {
    throw CheckpointError(fmt::format("non-finite {} in '{}'", what, p.name));
  }
  target = std::move(m);
}

}  // namespace

void write_checkpoint(std::ostream& out,
                      std::span<const Parameter* const> params) {
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) put_matrix(out, p->name, p->value);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) put_matrix(out, p->name, p->accum);
}

void read_checkpoint(std::istream& in, std::span<Parameter* const> params) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  if (const auto version = get_u32(in); version != kCheckpointVersion) {
    throw CheckpointError(
        fmt::format("unsupported checkpoint version {}", version));
  }
  const auto values = get_block(in);
  const auto accums = get_block(in);
  for (auto* p : params) {
    restore(values, *p, p->value, "values");
    restore(accums, *p, p->accum, "accumulator");
    p->gradient = Matrix(p->value.rows(), p->value.cols());
    p->touched.clear();
    if (p->sparse_columns) p->touched_flag.assign(p->value.cols(), 0);
  }
}

void save_checkpoint(const std::filesystem::path& path,
                     std::span<const Parameter* const> params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(fmt::format("cannot write {}", path.string()));
  write_checkpoint(out, params);
  if (!out) throw CheckpointError(fmt::format("write failed: {}", path.string()));
}

void load_checkpoint(const std::filesystem::path& path,
                     std::span<Parameter* const> params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot read {}", path.string()));
  read_checkpoint(in, params);
}

}  // namespace kbqa

#include "trex/diffnum/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "trex/error.hpp"

namespace trex::diffnum {

namespace {

constexpr const char* kMagic = "TREXCKPT";
constexpr int kVersion = 1;

template <typename T>
std::vector<std::byte> to_le_bytes(const Tensor<T>& t) {
  std::vector<std::byte> out(t.size() * sizeof(T));
  std::memcpy(out.data(), t.data(), out.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < out.size(); i += sizeof(T)) std::reverse(out.begin() + i, out.begin() + i + sizeof(T));
  }
  return out;
}

template <typename T>
std::vector<T> from_le_bytes(const std::vector<std::byte>& bytes) {
  std::vector<std::byte> copy = bytes;
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < copy.size(); i += sizeof(T)) std::reverse(copy.begin() + i, copy.begin() + i + sizeof(T));
  }
  std::vector<T> out(copy.size() / sizeof(T));
  std::memcpy(out.data(), copy.data(), copy.size());
  return out;
}

std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

void check_name(const std::string& name) {
  if (name.empty() || name.find_first_of(" \t\n\r") != std::string::npos) {
    throw Error(Errc::IoError, "checkpoint tensor name '" + name + "' must be non-empty without whitespace");
  }
}

}  // namespace

void Checkpoint::add(const std::string& name, const Tensor<float>& t) {
  check_name(name);
  entries_.push_back(Entry{name, DType::F32, t.shape(), to_le_bytes(t)});
}

void Checkpoint::add(const std::string& name, const Tensor<double>& t) {
  check_name(name);
  entries_.push_back(Entry{name, DType::F64, t.shape(), to_le_bytes(t)});
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

const Checkpoint::Entry& Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw Error(Errc::IoError, "checkpoint has no tensor '" + name + "'");
}

template <typename T>
Tensor<T> Checkpoint::get(const std::string& name) const {
  const Entry& e = find(name);
  if (e.dtype == DType::F32) {
    auto v = from_le_bytes<float>(e.bytes);
    return Tensor<T>(e.shape, std::vector<T>(v.begin(), v.end()));
  }
  auto v = from_le_bytes<double>(e.bytes);
  return Tensor<T>(e.shape, std::vector<T>(v.begin(), v.end()));
}

template Tensor<float> Checkpoint::get<float>(const std::string&) const;
template Tensor<double> Checkpoint::get<double>(const std::string&) const;

void Checkpoint::save(const std::filesystem::path& path) const {
  std::ostringstream header;
  header << kMagic << ' ' << kVersion << '\n' << "tensors " << entries_.size() << '\n';
  std::size_t offset = 0;
  for (const auto& e : entries_) {
    header << e.name << ' ' << (e.dtype == DType::F32 ? "f32" : "f64") << ' ';
    for (std::size_t i = 0; i < e.shape.size(); ++i) header << (i ? "," : "") << e.shape[i];
    if (e.shape.empty()) header << "1";
    header << ' ' << offset << ' ' << e.bytes.size() << '\n';
    offset += e.bytes.size();
  }
  header << "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write checkpoint " + path.string());
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& e : entries_) out.write(reinterpret_cast<const char*>(e.bytes.data()), static_cast<std::streamsize>(e.bytes.size()));
  if (!out) throw Error(Errc::IoError, "short write to checkpoint " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open checkpoint " + path.string());
  const auto fail = [&](const std::string& why) { return Error(Errc::IoError, path.string() + ": " + why); };

  std::string line;
  if (!std::getline(in, line)) throw fail("empty file");
  {
    std::istringstream ls(line);
    std::string magic;
    int version = 0;
    ls >> magic >> version;
    if (magic != kMagic) throw fail("not a checkpoint container");
    if (version != kVersion) throw fail("unsupported container version " + std::to_string(version));
  }
  std::size_t count = 0;
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string key;
    ls >> key >> count;
    if (key != "tensors") throw fail("missing tensor count");
  }
  struct Row {
    Entry entry;
    std::size_t offset;
    std::size_t nbytes;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw fail("truncated header");
    std::istringstream ls(line);
    std::string name, dtype, dims;
    Row row{};
    ls >> name >> dtype >> dims >> row.offset >> row.nbytes;
    if (!ls) throw fail("malformed header line '" + line + "'");
    row.entry.name = name;
    if (dtype == "f32") row.entry.dtype = DType::F32;
    else if (dtype == "f64") row.entry.dtype = DType::F64;
    else throw fail("unknown dtype '" + dtype + "'");
    std::istringstream ds(dims);
    std::string d;
    while (std::getline(ds, d, ',')) row.entry.shape.push_back(std::stoul(d));
    if (shape_size(row.entry.shape) * dtype_size(row.entry.dtype) != row.nbytes) throw fail("size mismatch for " + name);
    rows.push_back(std::move(row));
  }
  if (!std::getline(in, line) || line != "end") throw fail("missing header terminator");
  const auto payload_start = in.tellg();

  Checkpoint ckpt;
  for (auto& row : rows) {
    row.entry.bytes.resize(row.nbytes);
    in.seekg(payload_start + static_cast<std::streamoff>(row.offset));
    in.read(reinterpret_cast<char*>(row.entry.bytes.data()), static_cast<std::streamsize>(row.nbytes));
    if (!in) throw fail("truncated payload for " + row.entry.name);
    ckpt.entries_.push_back(std::move(row.entry));
  }
  return ckpt;
}

}  // namespace trex::diffnum

#include "elkb/model_container.hpp"

#include <cstring>
#include <fstream>

#include "elkb/common.hpp"
#include "elkb/errors.hpp"

namespace elkb {

namespace {
constexpr char kMagic[4] = {'E', 'L', 'W', 'T'};
}

void write_model_container(const std::filesystem::path& path,
                           const std::vector<TensorEntry>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create model container: " + path.string());
  out.write(kMagic, 4);
  std::string buf;
  for (const auto& t : tensors) {
    buf.clear();
    put_u32le(buf, static_cast<uint32_t>(t.name.size()));
    buf += t.name;
    put_u64le(buf, t.bytes.size());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.write(t.bytes.data(), static_cast<std::streamsize>(t.bytes.size()));
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<TensorEntry> read_model_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model container: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0)
    throw FormatError("malformed model container: bad magic");

  std::vector<TensorEntry> tensors;
  size_t pos = 4;
  while (pos < data.size()) {
    if (pos + 4 > data.size()) throw FormatError("malformed model container: truncated name length");
    uint32_t name_len = get_u32le(data.data() + pos);
    pos += 4;
    if (pos + name_len + 8 > data.size())
      throw FormatError("malformed model container: truncated entry header");
    TensorEntry t;
    t.name.assign(data.data() + pos, name_len);
    pos += name_len;
    uint64_t byte_len = get_u64le(data.data() + pos);
    pos += 8;
    if (pos + byte_len > data.size())
      throw FormatError("malformed model container: truncated tensor payload");
    t.bytes.assign(data.data() + pos, byte_len);
    pos += byte_len;
    tensors.push_back(std::move(t));
  }
  return tensors;
}

PruneReport prune_model_artifact(const std::filesystem::path& in_path,
                                 const std::filesystem::path& out_path,
                                 std::string_view remove_prefix) {
  auto tensors = read_model_container(in_path);
  std::vector<TensorEntry> kept;
  PruneReport report;
  for (auto& t : tensors) {
    if (t.name.starts_with(remove_prefix)) {
      ++report.tensors_removed;
    } else {
      ++report.tensors_kept;
      kept.push_back(std::move(t));
    }
  }
  if (report.tensors_kept == 0)
    throw ValidationError("prune would remove every tensor; refusing to emit an empty model");
  write_model_container(out_path, kept);
  report.bytes_before = static_cast<uint64_t>(std::filesystem::file_size(in_path));
  report.bytes_after = static_cast<uint64_t>(std::filesystem::file_size(out_path));
  return report;
}

}  // namespace elkb

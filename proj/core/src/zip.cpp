#include "spatial/zip.hpp"

#include "spatial/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>

namespace spatial::zip {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kStored = 0;
constexpr std::uint16_t kDeflated = 8;
// 1980-01-01 00:00 in DOS format.
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorCode::malformed_archive, "zip archive: " + what);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint16_t u16(std::size_t at) const {
    check(at, 2);
    return static_cast<std::uint16_t>(bytes_[at] | (bytes_[at + 1] << 8));
  }
  std::uint32_t u32(std::size_t at) const {
    check(at, 4);
    return static_cast<std::uint32_t>(bytes_[at]) | (static_cast<std::uint32_t>(bytes_[at + 1]) << 8) |
           (static_cast<std::uint32_t>(bytes_[at + 2]) << 16) |
           (static_cast<std::uint32_t>(bytes_[at + 3]) << 24);
  }
  std::span<const std::uint8_t> slice(std::size_t at, std::size_t len) const {
    check(at, len);
    return bytes_.subspan(at, len);
  }
  std::size_t size() const { return bytes_.size(); }

 private:
  void check(std::size_t at, std::size_t len) const {
    if (at > bytes_.size() || len > bytes_.size() - at) malformed("truncated");
  }
  std::span<const std::uint8_t> bytes_;
};

class Writer {
 public:
  void u16(std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::span<const std::uint8_t> data) { out.insert(out.end(), data.begin(), data.end()); }
  void text(const std::string& s) { out.insert(out.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> out;
};

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> input, std::size_t expected) {
  // One spare byte keeps the buffer non-null for empty entries and lets
  // oversized streams show up as extra output.
  std::vector<std::uint8_t> out(expected + 1);
  z_stream stream{};
  if (inflateInit2(&stream, -MAX_WBITS) != Z_OK) malformed("inflate init failed");
  stream.next_in = const_cast<Bytef*>(input.data());
  stream.avail_in = static_cast<uInt>(input.size());
  stream.next_out = out.data();
  stream.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&stream, Z_FINISH);
  const auto produced = stream.total_out;
  inflateEnd(&stream);
  if (rc != Z_STREAM_END || produced != expected) malformed("corrupt deflate stream");
  out.resize(expected);
  return out;
}

std::vector<std::uint8_t> deflate_raw(std::span<const std::uint8_t> input) {
  z_stream stream{};
  if (deflateInit2(&stream, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::io_error, "deflate init failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&stream, static_cast<uLong>(input.size())));
  stream.next_in = const_cast<Bytef*>(input.data());
  stream.avail_in = static_cast<uInt>(input.size());
  stream.next_out = out.data();
  stream.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&stream, Z_FINISH);
  out.resize(stream.total_out);
  deflateEnd(&stream);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::io_error, "deflate failed");
  return out;
}

std::uint32_t crc_of(std::span<const std::uint8_t> data) {
  return static_cast<std::uint32_t>(crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

bool safe_name(const std::string& name) {
  if (name.empty() || name.front() == '/' || name.find('\\') != std::string::npos) return false;
  std::size_t start = 0;
  while (start <= name.size()) {
    const auto end = std::min(name.find('/', start), name.size());
    if (name.compare(start, end - start, "..") == 0 && end - start == 2) return false;
    start = end + 1;
  }
  return true;
}

}  // namespace

Entries read_archive(std::span<const std::uint8_t> bytes) {
  const Reader r(bytes);
  if (bytes.size() < 22) malformed("too short for an end-of-central-directory record");

  // The end record sits within the last 64 KiB + 22 bytes.
  std::size_t end = std::string::npos;
  const std::size_t lowest = bytes.size() > 65557 ? bytes.size() - 65557 : 0;
  for (std::size_t at = bytes.size() - 22 + 1; at-- > lowest;) {
    if (r.u32(at) == kEndSig) {
      end = at;
      break;
    }
  }
  if (end == std::string::npos) malformed("no end-of-central-directory record");

  const std::uint16_t count = r.u16(end + 10);
  const std::uint32_t cd_offset = r.u32(end + 16);
  if (cd_offset == 0xffffffffu || count == 0xffff) malformed("zip64 archives are not supported");

  Entries entries;
  std::size_t at = cd_offset;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (r.u32(at) != kCentralSig) malformed("bad central directory signature");
    const std::uint16_t flags = r.u16(at + 8);
    const std::uint16_t method = r.u16(at + 10);
    const std::uint32_t crc = r.u32(at + 16);
    const std::uint32_t csize = r.u32(at + 20);
    const std::uint32_t usize = r.u32(at + 24);
    const std::uint16_t name_len = r.u16(at + 28);
    const std::uint16_t extra_len = r.u16(at + 30);
    const std::uint16_t comment_len = r.u16(at + 32);
    const std::uint32_t local = r.u32(at + 42);
    const auto name_bytes = r.slice(at + 46, name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    at += 46 + name_len + extra_len + comment_len;

    if (flags & 0x1) malformed(name + ": encrypted entries are not supported");
    if (!name.empty() && name.back() == '/') continue;
    if (!safe_name(name)) malformed("unsafe entry name '" + name + "'");

    if (r.u32(local) != kLocalSig) malformed(name + ": bad local header signature");
    const std::size_t data_at = local + 30 + r.u16(local + 26) + r.u16(local + 28);
    const auto data = r.slice(data_at, csize);

    std::vector<std::uint8_t> content;
    if (method == kStored) {
      if (csize != usize) malformed(name + ": stored size mismatch");
      content.assign(data.begin(), data.end());
    } else if (method == kDeflated) {
      content = inflate_raw(data, usize);
    } else {
      malformed(name + ": unsupported compression method " + std::to_string(method));
    }
    if (crc_of(content) != crc) malformed(name + ": CRC mismatch");
    entries[name] = std::move(content);
  }
  return entries;
}

std::vector<std::uint8_t> write_archive(const Entries& entries) {
  Writer w;
  struct Central {
    std::string name;
    std::uint32_t crc, csize, usize, offset;
  };
  std::vector<Central> central;
  for (const auto& [name, content] : entries) {
    const auto compressed = deflate_raw(content);
    Central c{name, crc_of(content), static_cast<std::uint32_t>(compressed.size()),
              static_cast<std::uint32_t>(content.size()), static_cast<std::uint32_t>(w.out.size())};
    w.u32(kLocalSig);
    w.u16(20);
    w.u16(0);
    w.u16(kDeflated);
    w.u16(kDosTime);
    w.u16(kDosDate);
    w.u32(c.crc);
    w.u32(c.csize);
    w.u32(c.usize);
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.u16(0);
    w.text(name);
    w.bytes(compressed);
    central.push_back(c);
  }
  const auto cd_offset = static_cast<std::uint32_t>(w.out.size());
  for (const auto& c : central) {
    w.u32(kCentralSig);
    w.u16(20);
    w.u16(20);
    w.u16(0);
    w.u16(kDeflated);
    w.u16(kDosTime);
    w.u16(kDosDate);
    w.u32(c.crc);
    w.u32(c.csize);
    w.u32(c.usize);
    w.u16(static_cast<std::uint16_t>(c.name.size()));
    w.u16(0);
    w.u16(0);
    w.u16(0);
    w.u16(0);
    w.u32(0);
    w.u32(c.offset);
    w.text(c.name);
  }
  const auto cd_size = static_cast<std::uint32_t>(w.out.size()) - cd_offset;
  w.u32(kEndSig);
  w.u16(0);
  w.u16(0);
  w.u16(static_cast<std::uint16_t>(central.size()));
  w.u16(static_cast<std::uint16_t>(central.size()));
  w.u32(cd_size);
  w.u32(cd_offset);
  w.u16(0);
  return w.out;
}

}  // namespace spatial::zip

#pragma once

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "error.hpp"

namespace avlab::fieldfile {

using json = nlohmann::json;

inline constexpr char kMagic[4] = {'A', 'V', 'F', '1'};
inline constexpr std::uint32_t kVersion = 1;
inline constexpr const char* kHashKey = "body_sha256";
inline const std::string kHashPlaceholder(64, '0');

struct Header {
  std::uint32_t version = kVersion;
  std::uint32_t n = 0;
  std::uint32_t nt = 0;
  double t0 = 0.0;
  double tf = 0.0;
  std::uint32_t levels = 0;
  json meta = json::object();

  double dt() const { return nt > 1 ? (tf - t0) / (nt - 1) : 0.0; }
  double time(std::size_t frame) const { return t0 + static_cast<double>(frame) * dt(); }
};

// Incremental SHA-256 with a hex digest.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) { EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr); }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_.get(), p, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
      out += digits[md[i] >> 4];
      out += digits[md[i] & 15];
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

namespace detail {

template <class T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto b = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(b.begin(), b.end());
    return std::bit_cast<T>(b);
  }
  return v;
}

template <class T>
void put(std::string& s, T v) {
  v = to_le(v);
  s.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(const unsigned char*& p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return to_le(v);
}

inline void pwrite_all(int fd, const void* buf, std::size_t len, off_t off, const std::string& path) {
  auto* p = static_cast<const char*>(buf);
  while (len) {
    ssize_t w = ::pwrite(fd, p, len, off);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw IoError("write to " + path + " failed: " + std::strerror(errno));
    }
    p += w;
    off += w;
    len -= static_cast<std::size_t>(w);
  }
}

inline void pread_all(int fd, void* buf, std::size_t len, off_t off, const std::string& path) {
  auto* p = static_cast<char*>(buf);
  while (len) {
    ssize_t r = ::pread(fd, p, len, off);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw IoError("read from " + path + " failed: " + std::strerror(errno));
    }
    if (r == 0) throw IoError(path + " is truncated");
    p += r;
    off += r;
    len -= static_cast<std::size_t>(r);
  }
}

}  // namespace detail

// Streaming, file-backed space-time field of streamfunction frames.
class FieldFile {
 public:
  FieldFile(const FieldFile&) = delete;
  FieldFile& operator=(const FieldFile&) = delete;
  FieldFile(FieldFile&& o) noexcept { *this = std::move(o); }
  FieldFile& operator=(FieldFile&& o) noexcept {
    std::swap(fd_, o.fd_);
    std::swap(path_, o.path_);
    std::swap(h_, o.h_);
    std::swap(body_off_, o.body_off_);
    std::swap(hash_off_, o.hash_off_);
    return *this;
  }
  ~FieldFile() {
    if (fd_ >= 0) ::close(fd_);
  }

  static FieldFile create(const std::string& path, Header h) {
    if (h.nt < 1 || h.n < 1) throw ConfigError("field must have at least one frame and one grid point");
    h.meta[kHashKey] = kHashPlaceholder;
    std::string blob = h.meta.dump();
    std::string head(kMagic, 4);
    detail::put(head, h.version);
    detail::put(head, h.n);
    detail::put(head, h.nt);
    detail::put(head, h.t0);
    detail::put(head, h.tf);
    detail::put(head, h.levels);
    detail::put(head, static_cast<std::uint32_t>(blob.size()));
    std::size_t blob_off = head.size();
    head += blob;

    FieldFile f;
    f.path_ = path;
    f.fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (f.fd_ < 0) throw IoError("cannot create " + path + ": " + std::strerror(errno));
    f.h_ = h;
    f.body_off_ = head.size();
    f.hash_off_ = blob_off + blob.find(kHashPlaceholder);
    detail::pwrite_all(f.fd_, head.data(), head.size(), 0, path);
    if (::ftruncate(f.fd_, static_cast<off_t>(f.body_off_ + f.body_bytes())) != 0)
      throw IoError("cannot size " + path + ": " + std::strerror(errno));
    return f;
  }

  static FieldFile open(const std::string& path, bool writable = false) {
    FieldFile f;
    f.path_ = path;
    f.fd_ = ::open(path.c_str(), writable ? O_RDWR : O_RDONLY);
    if (f.fd_ < 0) throw IoError("cannot open " + path + ": " + std::strerror(errno));
    unsigned char fixed[40];
    detail::pread_all(f.fd_, fixed, sizeof fixed, 0, path);
    if (std::memcmp(fixed, kMagic, 4) != 0) throw IoError(path + " is not an AVF1 field file");
    const unsigned char* p = fixed + 4;
    Header h;
    h.version = detail::get<std::uint32_t>(p);
    h.n = detail::get<std::uint32_t>(p);
    h.nt = detail::get<std::uint32_t>(p);
    h.t0 = detail::get<double>(p);
    h.tf = detail::get<double>(p);
    h.levels = detail::get<std::uint32_t>(p);
    auto len = detail::get<std::uint32_t>(p);
    if (h.version != kVersion) throw IoError(path + ": unsupported field file version " + std::to_string(h.version));
    std::string blob(len, '\0');
    detail::pread_all(f.fd_, blob.data(), len, 40, path);
    try {
      h.meta = json::parse(blob);
    } catch (const json::exception& e) {
      throw IoError(path + ": corrupt metadata: " + e.what());
    }
    f.h_ = h;
    f.body_off_ = 40 + len;
    auto pos = blob.find("\"" + std::string(kHashKey) + "\":\"");
    f.hash_off_ = pos == std::string::npos ? 0 : 40 + pos + std::strlen(kHashKey) + 4;
    struct stat st {};
    ::fstat(f.fd_, &st);
    if (static_cast<std::size_t>(st.st_size) < f.body_off_ + f.body_bytes()) throw IoError(path + " is truncated");
    return f;
  }

  const Header& header() const { return h_; }
  const std::string& path() const { return path_; }
  std::size_t frame_values() const { return static_cast<std::size_t>(h_.n) * h_.n; }
  std::size_t frame_bytes() const { return frame_values() * sizeof(double); }
  std::size_t body_bytes() const { return frame_bytes() * h_.nt; }

  void write_frame(std::size_t k, const double* v) {
    check(k);
    if constexpr (std::endian::native == std::endian::big) {
      std::vector<double> tmp(v, v + frame_values());
      for (auto& x : tmp) x = detail::to_le(x);
      detail::pwrite_all(fd_, tmp.data(), frame_bytes(), offset(k), path_);
    } else {
      detail::pwrite_all(fd_, v, frame_bytes(), offset(k), path_);
    }
  }

  void read_frame(std::size_t k, double* v) const {
    check(k);
    detail::pread_all(fd_, v, frame_bytes(), offset(k), path_);
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t i = 0; i < frame_values(); ++i) v[i] = detail::to_le(v[i]);
  }

  std::vector<double> read_frame(std::size_t k) const {
    std::vector<double> v(frame_values());
    read_frame(k, v.data());
    return v;
  }

  std::string body_hash() const {
    Sha256 sha;
    std::vector<char> buf(std::min<std::size_t>(body_bytes(), 1u << 22));
    std::size_t done = 0;
    while (done < body_bytes()) {
      std::size_t chunk = std::min(buf.size(), body_bytes() - done);
      detail::pread_all(fd_, buf.data(), chunk, static_cast<off_t>(body_off_ + done), path_);
      sha.update(buf.data(), chunk);
      done += chunk;
    }
    return sha.hex();
  }

  // Hashes the body and patches the metadata placeholder in place.
  std::string seal() {
    if (!hash_off_) throw IoError(path_ + " has no hash slot");
    std::string h = body_hash();
    detail::pwrite_all(fd_, h.data(), h.size(), static_cast<off_t>(hash_off_), path_);
    h_.meta[kHashKey] = h;
    if (::fsync(fd_) != 0) throw IoError("fsync " + path_ + " failed: " + std::strerror(errno));
    return h;
  }

  std::string stored_hash() const { return h_.meta.value(kHashKey, std::string{}); }
  bool verify() const { return stored_hash() == body_hash(); }

 private:
  FieldFile() = default;
  void check(std::size_t k) const {
    if (k >= h_.nt) throw ConfigError("frame " + std::to_string(k) + " beyond stored span of " + path_);
  }
  off_t offset(std::size_t k) const { return static_cast<off_t>(body_off_ + k * frame_bytes()); }

  int fd_ = -1;
  std::string path_;
  Header h_;
  std::size_t body_off_ = 0;
  std::size_t hash_off_ = 0;
};

}  // namespace avlab::fieldfile

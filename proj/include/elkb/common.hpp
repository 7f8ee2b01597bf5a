#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace elkb {

// ---- little-endian scalar encoding ----------------------------------------

inline void put_u32le(std::string& out, uint32_t v) {
  char b[4];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  b[2] = static_cast<char>((v >> 16) & 0xff);
  b[3] = static_cast<char>((v >> 24) & 0xff);
  out.append(b, 4);
}

inline void put_u64le(std::string& out, uint64_t v) {
  put_u32le(out, static_cast<uint32_t>(v & 0xffffffffu));
  put_u32le(out, static_cast<uint32_t>(v >> 32));
}

inline void put_u16le(std::string& out, uint16_t v) {
  char b[2];
  b[0] = static_cast<char>(v & 0xff);
  b[1] = static_cast<char>((v >> 8) & 0xff);
  out.append(b, 2);
}

inline void put_f32le(std::string& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_u32le(out, u);
}

inline void put_f64le(std::string& out, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64le(out, u);
}

inline void put_str(std::string& out, std::string_view s) {
  put_u32le(out, static_cast<uint32_t>(s.size()));
  out.append(s.data(), s.size());
}

inline uint16_t get_u16le(const char* p) {
  return static_cast<uint16_t>(static_cast<uint8_t>(p[0]) |
                               (static_cast<uint8_t>(p[1]) << 8));
}

inline uint32_t get_u32le(const char* p) {
  return static_cast<uint32_t>(static_cast<uint8_t>(p[0])) |
         (static_cast<uint32_t>(static_cast<uint8_t>(p[1])) << 8) |
         (static_cast<uint32_t>(static_cast<uint8_t>(p[2])) << 16) |
         (static_cast<uint32_t>(static_cast<uint8_t>(p[3])) << 24);
}

inline uint64_t get_u64le(const char* p) {
  return static_cast<uint64_t>(get_u32le(p)) |
         (static_cast<uint64_t>(get_u32le(p + 4)) << 32);
}

inline float get_f32le(const char* p) {
  uint32_t u = get_u32le(p);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

inline double get_f64le(const char* p) {
  uint64_t u = get_u64le(p);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

// ---- timing ----------------------------------------------------------------

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point t0, Clock::time_point t1) {
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

class StopWatch {
 public:
  StopWatch() : start_(Clock::now()) {}
  double ms() const { return elapsed_ms(start_, Clock::now()); }

 private:
  Clock::time_point start_;
};

// ---- order statistics --------------------------------------------------------

// Percentile with linear interpolation over the sorted sample. q in [0,1].
double percentile(std::vector<double> values, double q);
double median(std::vector<double> values);

}  // namespace elkb

#pragma once

// Little-endian scalar helpers for the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "radiomap/errors.hpp"

namespace radiomap::binary {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
inline void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
inline T get(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("corrupt file: unexpected end of data");
  return v;
}

inline void put_u8(std::ostream& os, std::uint8_t v) { put(os, v); }
inline void put_u32(std::ostream& os, std::uint32_t v) { put(os, v); }
inline void put_u64(std::ostream& os, std::uint64_t v) { put(os, v); }
inline void put_i32(std::ostream& os, std::int32_t v) { put(os, v); }
inline void put_i64(std::ostream& os, std::int64_t v) { put(os, v); }
inline void put_f32(std::ostream& os, float v) { put(os, v); }
inline void put_f64(std::ostream& os, double v) { put(os, v); }

inline std::uint8_t get_u8(std::istream& is) { return get<std::uint8_t>(is); }
inline std::uint32_t get_u32(std::istream& is) { return get<std::uint32_t>(is); }
inline std::uint64_t get_u64(std::istream& is) { return get<std::uint64_t>(is); }
inline std::int32_t get_i32(std::istream& is) { return get<std::int32_t>(is); }
inline std::int64_t get_i64(std::istream& is) { return get<std::int64_t>(is); }
inline float get_f32(std::istream& is) { return get<float>(is); }
inline double get_f64(std::istream& is) { return get<double>(is); }

}  // namespace radiomap::binary

#ifndef LMD_BINARY_IO_H_
#define LMD_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "lmd/common.h"

namespace lmd::binary {

// Little-endian scalar encoding independent of host byte order.
template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t,
            std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits = std::bit_cast<U>(value);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>(bits & 0xFF);
    if constexpr (sizeof(T) > 1) bits = static_cast<U>(bits >> 8);
  }
  os.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t,
            std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw Error("unexpected end of binary record");
  }
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    if constexpr (sizeof(T) > 1) bits = static_cast<U>(bits << 8);
    bits = static_cast<U>(bits | bytes[i]);
  }
  return std::bit_cast<T>(bits);
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  if (n > (1u << 20)) throw Error("string field too long");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw Error("unexpected end of binary record");
  return s;
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char buf[4];
  if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0) {
    throw Error(std::string("bad magic, expected ") + magic);
  }
}

}  // namespace lmd::binary

#endif  // LMD_BINARY_IO_H_

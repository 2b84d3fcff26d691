#pragma once

// Little-endian primitive I/O for the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "ausc/error.hpp"

namespace ausc::binio {

template <typename U>
void put_uint(std::ostream& out, U v) {
    char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, sizeof(U));
}

template <typename U>
U get_uint(std::istream& in) {
    unsigned char b[sizeof(U)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) throw FormatError("unexpected end of binary data");
    U v = 0;
    for (std::size_t i = sizeof(U); i-- > 0;) v = static_cast<U>((v << 8) | b[i]);
    return v;
}

inline void put_f32(std::ostream& out, float f) { put_uint(out, std::bit_cast<std::uint32_t>(f)); }
inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_uint<std::uint32_t>(in)); }
inline void put_f64(std::ostream& out, double f) { put_uint(out, std::bit_cast<std::uint64_t>(f)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_uint<std::uint64_t>(in)); }

inline void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
    char got[4];
    if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
        throw FormatError(std::string("bad magic, expected ") + magic);
    }
}

inline std::string get_bytes(std::istream& in, std::size_t n) {
    std::string s(n, '\0');
    if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError("unexpected end of binary data");
    return s;
}

}  // namespace ausc::binio

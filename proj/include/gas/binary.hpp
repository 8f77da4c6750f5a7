#pragma once

// Little-endian binary stream helpers shared by the dataset and checkpoint
// formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gas/error.hpp"

namespace gas::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
public:
    explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw RuntimeError("cannot open '" + path + "' for writing");
    }

    void bytes(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw RuntimeError("write failed on '" + path_ + "'");
    }

    template <class T>
    void scalar(T value) {
        static_assert(std::is_arithmetic_v<T>);
        bytes(&value, sizeof(T));
    }

    void u8(std::uint8_t v) { scalar(v); }
    void u32(std::uint32_t v) { scalar(v); }
    void u64(std::uint64_t v) { scalar(v); }
    void f64(double v) { scalar(v); }

    void f64s(const double* data, std::size_t n) { bytes(data, n * sizeof(double)); }

    /// u32 length followed by UTF-8 bytes.
    void string(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

    void close() {
        out_.close();
        if (!out_) throw RuntimeError("closing '" + path_ + "' failed");
    }

private:
    std::string path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw RuntimeError("cannot open '" + path + "' for reading");
    }

    const std::string& path() const { return path_; }

    void bytes(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw SchemaError("'" + path_ + "' is truncated");
    }

    template <class T>
    T scalar() {
        T value{};
        bytes(&value, sizeof(T));
        return value;
    }

    std::uint8_t u8() { return scalar<std::uint8_t>(); }
    std::uint32_t u32() { return scalar<std::uint32_t>(); }
    std::uint64_t u64() { return scalar<std::uint64_t>(); }
    double f64() { return scalar<double>(); }

    void f64s(double* data, std::size_t n) { bytes(data, n * sizeof(double)); }

    std::string string(std::size_t max_len = 1u << 20) {
        const std::uint32_t n = u32();
        if (n > max_len) throw SchemaError("'" + path_ + "': string length " + std::to_string(n) + " is implausible");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

    /// Reads `expected.size()` bytes and compares them with the magic tag.
    void magic(const std::string& expected) {
        std::string got(expected.size(), '\0');
        in_.read(got.data(), static_cast<std::streamsize>(got.size()));
        if (static_cast<std::size_t>(in_.gcount()) != got.size() || got != expected)
            throw SchemaError("'" + path_ + "' does not start with the expected magic header");
    }

    bool at_end() {
        return in_.peek() == std::char_traits<char>::eof();
    }

private:
    std::string path_;
    std::ifstream in_;
};

}  // namespace gas::io

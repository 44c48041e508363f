#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "kernseg/errors.hpp"

namespace kernseg::io {

/// Raw writer in host byte order; artifacts round-trip bit-exactly on the same platform.
class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put_array(const T* data, std::size_t n) {
        if (n) out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
    }

    void put_string(std::string_view s) {
        put<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void put_magic(std::string_view magic) { out_.write(magic.data(), static_cast<std::streamsize>(magic.size())); }

    void check() const {
        if (!out_) throw std::runtime_error("write failed");
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        T v{};
        read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void get_array(T* data, std::size_t n) {
        read(reinterpret_cast<char*>(data), n * sizeof(T));
    }

    /// Length-prefixed count, bounded to reject absurd sizes from corrupt files.
    std::uint64_t get_count(std::uint64_t limit) {
        const std::size_t at = offset_;
        const auto n = get<std::uint64_t>();
        if (n > limit) throw ParseError("implausible element count", at);
        return n;
    }

    std::string get_string() {
        const auto n = get_count(1u << 20);
        std::string s(n, '\0');
        read(s.data(), n);
        return s;
    }

    void expect_magic(std::string_view magic) {
        std::string got(magic.size(), '\0');
        const std::size_t at = offset_;
        read(got.data(), got.size());
        if (got != magic) throw ParseError("bad magic, expected " + std::string(magic), at);
    }

    std::size_t offset() const noexcept { return offset_; }

private:
    void read(char* dst, std::size_t n) {
        if (n == 0) return;
        in_.read(dst, static_cast<std::streamsize>(n));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (got != n) throw ParseError("truncated input", offset_ + got);
        offset_ += n;
    }

    std::istream& in_;
    std::size_t offset_ = 0;
};

}  // namespace kernseg::io

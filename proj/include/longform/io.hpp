#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "longform/common.hpp"

namespace longform {

// Little-endian binary record writer. All floating point is 64-bit so that
// save/load round trips are bit exact.
class BinaryWriter {
public:
    explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw ParseError("cannot open '" + path + "' for writing");
    }

    void magic(const char tag[8]) { out_.write(tag, 8); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }

    void vec(const Eigen::VectorXd& v) {
        u64(static_cast<std::uint64_t>(v.size()));
        raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    }

    void mat(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    }

    bool good() const { return out_.good(); }

private:
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    std::ofstream out_;
};

// Matching reader. `section()` names the record currently being parsed so a
// truncated or malformed file reports where it broke.
class BinaryReader {
public:
    explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw ParseError("cannot open '" + path + "' for reading");
    }

    void section(std::string name) { section_ = std::move(name); }

    void expect_magic(const char tag[8], const std::string& kind) {
        char got[8];
        raw(got, 8);
        if (std::memcmp(got, tag, 8) != 0)
            throw ParseError("'" + path_ + "' is not a " + kind + " file (bad magic)");
    }

    std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
    double f64() { double v; raw(&v, sizeof v); return v; }

    Eigen::VectorXd vec() {
        auto n = checked_dim(u64());
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        raw(v.data(), sizeof(double) * n);
        return v;
    }

    Eigen::MatrixXd mat() {
        auto r = checked_dim(u64());
        auto c = checked_dim(u64());
        Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        raw(m.data(), sizeof(double) * r * c);
        return m;
    }

    void expect_eof() {
        in_.peek();
        if (!in_.eof())
            throw ParseError("'" + path_ + "': trailing bytes after " + section_);
    }

private:
    std::size_t checked_dim(std::uint64_t n) {
        if (n > (1ULL << 32))
            throw ParseError("'" + path_ + "': implausible dimension " + std::to_string(n) +
                             " while reading " + section_);
        return static_cast<std::size_t>(n);
    }

    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw ParseError("'" + path_ + "': truncated file while reading " + section_);
    }

    std::ifstream in_;
    std::string path_;
    std::string section_ = "header";
};

}  // namespace longform

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "freqshield/tensor.hpp"

namespace freqshield {

/// Little-endian byte sink used by the checkpoint formats.
class BinaryWriter {
public:
    void bytes(const void* data, std::size_t n);
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    /// Raw values only; shapes are implied by the header.
    void tensor(const Tensor& t);

    const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
    void write_file(const std::filesystem::path& path) const;

private:
    std::vector<std::uint8_t> buf_;
};

class BinaryReader {
public:
    BinaryReader(std::vector<std::uint8_t> data, std::string source);
    static BinaryReader from_file(const std::filesystem::path& path);

    void bytes(void* out, std::size_t n);
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    Tensor tensor(Shape shape);
    /// Throws DataError unless every byte has been consumed.
    void expect_end() const;

    [[noreturn]] void fail(const std::string& what) const;

private:
    std::vector<std::uint8_t> data_;
    std::string source_;
    std::size_t pos_ = 0;
};

}  // namespace freqshield

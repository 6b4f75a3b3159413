#include "freqshield/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "freqshield/errors.hpp"

namespace freqshield {

void BinaryWriter::bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
}

void BinaryWriter::u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::tensor(const Tensor& t) {
    for (double v : t.values()) f64(v);
}

void BinaryWriter::write_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

BinaryReader::BinaryReader(std::vector<std::uint8_t> data, std::string source)
    : data_(std::move(data)), source_(std::move(source)) {}

BinaryReader BinaryReader::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return BinaryReader(std::move(data), path.string());
}

void BinaryReader::fail(const std::string& what) const { throw DataError(source_ + ": " + what); }

void BinaryReader::bytes(void* out, std::size_t n) {
    if (data_.size() - pos_ < n) fail("unexpected end of file");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
}

std::uint16_t BinaryReader::u16() {
    std::uint8_t b[2];
    bytes(b, 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t BinaryReader::u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

std::uint64_t BinaryReader::u64() {
    std::uint8_t b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

Tensor BinaryReader::tensor(Shape shape) {
    Tensor t(shape);
    for (double& v : t.values()) v = f64();
    return t;
}

void BinaryReader::expect_end() const {
    if (pos_ != data_.size()) fail("trailing bytes after payload");
}

}  // namespace freqshield

#include "freqshield/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "freqshield/errors.hpp"

namespace freqshield {

namespace fs = std::filesystem;

std::uint8_t quantize_8bit(double value) noexcept {
    const double v = std::clamp(value, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError(ImageErrorKind::MissingFile, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Tensor from_bytes(int height, int width, int channels, const std::uint8_t* bytes) {
    Tensor out(height, width, channels);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = bytes[i] / 255.0;
    return out;
}

Tensor decode_png(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ImageError(ImageErrorKind::CorruptPayload, path.string() + ": " + msg);
    }
    if (image.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&image);
        throw ImageError(ImageErrorKind::UnsupportedFormat,
                         path.string() + ": only 8-bit PNG images are supported");
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int channels = color ? 3 : 1;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw ImageError(ImageErrorKind::CorruptPayload, path.string() + ": " + msg);
    }
    return from_bytes(static_cast<int>(image.height), static_cast<int>(image.width), channels,
                      pixels.data());
}

// Parses the whitespace/comment separated header fields of a binary netpbm file.
class NetpbmHeader {
public:
    NetpbmHeader(const std::vector<std::uint8_t>& bytes, const fs::path& path)
        : bytes_(bytes), path_(path) {}

    int next_int() {
        skip_space();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) corrupt("malformed header");
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_++] - '0');
            if (value > 1'000'000) corrupt("header value out of range");
        }
        return static_cast<int>(value);
    }

    // Exactly one whitespace byte separates maxval from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) corrupt("malformed header");
        return pos_ + 1;
    }

    [[noreturn]] void corrupt(const std::string& what) const {
        throw ImageError(ImageErrorKind::CorruptPayload, path_.string() + ": " + what);
    }

private:
    void skip_space() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<std::uint8_t>& bytes_;
    const fs::path& path_;
    std::size_t pos_ = 2;
};

Tensor decode_netpbm(const std::vector<std::uint8_t>& bytes, const fs::path& path) {
    const int channels = bytes[1] == '6' ? 3 : 1;
    NetpbmHeader header(bytes, path);
    const int width = header.next_int();
    const int height = header.next_int();
    const int maxval = header.next_int();
    if (width <= 0 || height <= 0) header.corrupt("zero image dimension");
    if (maxval != 255) {
        throw ImageError(ImageErrorKind::UnsupportedFormat,
                         path.string() + ": only maxval 255 netpbm files are supported");
    }
    const std::size_t offset = header.raster_offset();
    const std::size_t needed = static_cast<std::size_t>(width) * height * channels;
    if (bytes.size() < offset + needed) header.corrupt("truncated raster");
    return from_bytes(height, width, channels, bytes.data() + offset);
}

std::vector<std::uint8_t> to_bytes(const Tensor& image) {
    std::vector<std::uint8_t> bytes(image.size());
    for (std::size_t i = 0; i < image.size(); ++i) bytes[i] = quantize_8bit(image[i]);
    return bytes;
}

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

}  // namespace

Tensor load_image(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw ImageError(ImageErrorKind::MissingFile, "no such image file: " + path.string());
    }
    const auto bytes = read_bytes(path);
    static constexpr std::array<std::uint8_t, 8> kPngMagic{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (bytes.size() >= kPngMagic.size() &&
        std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
        return decode_png(bytes, path);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
        return decode_netpbm(bytes, path);
    }
    throw ImageError(ImageErrorKind::UnsupportedFormat, "unrecognized image format: " + path.string());
}

void save_image(const Tensor& image, const fs::path& path) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw ShapeError("save_image: expected 1 or 3 channels, got " + to_string(image.shape()));
    }
    const auto bytes = to_bytes(image);
    const std::string ext = lower_extension(path);
    if (ext == ".ppm" || ext == ".pgm") {
        const bool want_color = ext == ".ppm";
        Tensor converted = image;
        if (want_color && image.channels() == 1) {
            converted = broadcast_channels(image, 3);
        } else if (!want_color && image.channels() == 3) {
            throw ShapeError("save_image: cannot write a 3-channel image as PGM");
        }
        const auto raster = to_bytes(converted);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ImageError(ImageErrorKind::Unwritable, "cannot write " + path.string());
        out << (want_color ? "P6" : "P5") << '\n'
            << image.width() << ' ' << image.height() << "\n255\n";
        out.write(reinterpret_cast<const char*>(raster.data()),
                  static_cast<std::streamsize>(raster.size()));
        if (!out) throw ImageError(ImageErrorKind::Unwritable, "write failed: " + path.string());
        return;
    }

    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw ImageError(ImageErrorKind::Unwritable, "cannot write " + path.string() + ": " + msg);
    }
}

}  // namespace freqshield

#pragma once

#include <stdexcept>
#include <string>

namespace freqshield {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or an invalid shape for an operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Argument outside its documented domain (probabilities, bounds, counts).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient, or a diverging optimization.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Problems with datasets, checkpoints and other on-disk artifacts.
class DataError : public Error {
public:
    using Error::Error;
};

enum class ImageErrorKind { MissingFile, UnsupportedFormat, CorruptPayload, Unwritable };

class ImageError : public DataError {
public:
    ImageError(ImageErrorKind kind, const std::string& message)
        : DataError(message), kind_(kind) {}

    ImageErrorKind kind() const noexcept { return kind_; }

private:
    ImageErrorKind kind_;
};

}  // namespace freqshield

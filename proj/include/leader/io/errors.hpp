#pragma once

#include <stdexcept>
#include <string>

namespace leader::io {

/// Malformed or unsupported file content.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Weight container checksum does not match its contents.
class CrcError : public FormatError {
public:
    using FormatError::FormatError;
};

/// File ends before the structure it declares.
class TruncationError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Weight container lists a tensor name twice.
class DuplicateNameError : public FormatError {
public:
    using FormatError::FormatError;
};

/// The operating system refused a read or write.
class FileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace leader::io

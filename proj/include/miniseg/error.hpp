#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace miniseg {

// Malformed bytes in a file we parse. offset is the byte position at which
// parsing could not continue.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          message_(what),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::string message_;
    std::size_t offset_;
};

// Could not open, read or write a path.
class IoError : public std::runtime_error {
public:
    IoError(const std::string& what, std::filesystem::path path)
        : std::runtime_error(what + ": " + path.string()), path_(std::move(path)) {}

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace miniseg

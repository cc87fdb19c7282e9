#pragma once

#include <stdexcept>
#include <string>

namespace topoembed {

enum class ErrorKind {
    Domain,       // argument outside the valid mathematical domain
    Contract,     // shape or configuration mismatch
    Boundary,     // window or region outside raster bounds
    DataQuality,  // nodata contamination, excessive rejections
    Capacity,     // not enough data to satisfy a request
    EmptyClass,   // a class query produced no coordinates
    Network,      // remote endpoint unreachable
    Numeric,      // NaN or infinite value during computation
    Io,           // file read/write failure or malformed file
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
    if (!ok) {
        throw Error(kind, what);
    }
}

} // namespace topoembed

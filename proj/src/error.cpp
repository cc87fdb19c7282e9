#include "topoembed/error.hpp"

namespace topoembed {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Boundary: return "boundary";
    case ErrorKind::DataQuality: return "data-quality";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::EmptyClass: return "empty-class";
    case ErrorKind::Network: return "network";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace topoembed

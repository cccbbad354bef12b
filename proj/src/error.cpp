#include "logan/error.hpp"

namespace logan {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Contract: return "contract";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Config: return "config";
    case ErrorKind::AdapterFormat: return "adapter-format";
    case ErrorKind::LayoutIncomplete: return "layout-incomplete";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Reference: return "reference";
    case ErrorKind::Corruption: return "corruption";
    case ErrorKind::Version: return "version";
    case ErrorKind::Execution: return "execution";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

} // namespace logan

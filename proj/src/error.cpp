#include "stefan/error.hpp"

namespace stefan {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::ConstraintViolation: return "constraint-violation";
        case ErrorKind::NumericError: return "numeric-error";
        case ErrorKind::SingularSystem: return "singular-system";
        case ErrorKind::SyntaxError: return "syntax-error";
        case ErrorKind::DomainError: return "domain-error";
        case ErrorKind::IoError: return "io-error";
    }
    return "unknown";
}

}  // namespace stefan

#include "hda/error.hpp"

namespace hda {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::shape: return "shape";
    case ErrorKind::contract: return "contract";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::diverged: return "diverged";
    case ErrorKind::missing_artifact: return "missing_artifact";
    case ErrorKind::usage: return "usage";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data:
    case ErrorKind::shape:
    case ErrorKind::contract:
    case ErrorKind::numeric:
    case ErrorKind::usage: return 3;
    case ErrorKind::diverged: return 4;
    case ErrorKind::missing_artifact: return 5;
  }
  return 1;
}

}  // namespace hda

#include "bellsim/errors.hpp"

namespace bellsim {

ExitCode exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ValidationError*>(&e)) return ExitCode::validation;
  if (dynamic_cast<const IoError*>(&e)) return ExitCode::io;
  return ExitCode::runtime;
}

}  // namespace bellsim

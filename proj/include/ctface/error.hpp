#pragma once

#include <stdexcept>
#include <string>

namespace ctface {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration; the CLI maps it to exit status 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// File content does not conform to its documented format.
class FormatError : public Error {
public:
    using Error::Error;
};

void log_warning(const std::string& message);
void log_info(const std::string& message);

/// Silences log_info output (warnings are always printed).
void set_verbose(bool verbose);

}  // namespace ctface

#ifndef IMAFD_ERROR_HPP
#define IMAFD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace imafd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent input data: unreadable files, dimension mismatches,
/// non-finite values, empty classes.
class InputError : public Error {
public:
    using Error::Error;
};

/// Parameter or configuration values outside their documented ranges.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace imafd

#endif // IMAFD_ERROR_HPP

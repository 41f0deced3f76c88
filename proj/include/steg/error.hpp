#pragma once

#include <stdexcept>
#include <string>

namespace steg {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or malformed configuration files.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (token ids out of range, bad hex, bad JSON shape).
class EncodingError : public Error {
public:
    using Error::Error;
};

/// A model returned something that is not a probability distribution.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A remote or subprocess model could not be reached.
class ModelUnavailable : public Error {
public:
    using Error::Error;
};

/// Conditioning on a bit prefix that carries zero probability mass.
class InvalidPrefix : public Error {
public:
    using Error::Error;
};

/// A sampled branch had probability zero.
class ImpossibleSample : public Error {
public:
    using Error::Error;
};

} // namespace steg

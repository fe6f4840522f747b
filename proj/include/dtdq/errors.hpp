#pragma once

#include <stdexcept>
#include <string>

namespace dtdq {

/// Invalid model input: bad distribution parameters, bad k, bad config.
class ModelError : public std::invalid_argument {
public:
    explicit ModelError(const std::string& what) : std::invalid_argument(what) {}
};

/// A solve or iteration that failed to meet its tolerance.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dtdq

#pragma once

#include <stdexcept>
#include <string>

namespace cupart {

struct shape_error : std::runtime_error {
    explicit shape_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct argument_error : std::invalid_argument {
    explicit argument_error(const std::string& msg) : std::invalid_argument(msg) {}
};

struct geometry_error : std::runtime_error {
    explicit geometry_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct hcpm_error : std::runtime_error {
    explicit hcpm_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct sequence_error : std::runtime_error {
    explicit sequence_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cupart

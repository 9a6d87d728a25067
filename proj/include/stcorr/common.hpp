#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stcorr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorCode {
    window_out_of_range,
    aspect_ratio,
    degenerate_row,
    degenerate_coefficients,
    branch_point,
    bin_mismatch,
    rank_deficient,
    empty_grid,
    domain_error,
    shape_mismatch,
    invalid_spec,
    parse_error,
    io_error,
    config_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Selects between the OpenMP kernels and the single-threaded reference path.
// Both produce bit-identical results; the serial path exists for testing and
// for nesting inside an outer parallel loop.
enum class Exec { serial, parallel };

// Thread count used by Exec::parallel kernels. 0 means "all available cores".
void set_num_threads(int n);
int num_threads();

}  // namespace stcorr

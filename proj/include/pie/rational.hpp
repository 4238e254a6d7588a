#pragma once

#include <string>
#include <string_view>

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <Eigen/Dense>

namespace pie {

// Exact rational scalar. Expression templates are disabled so that the type
// behaves like a plain value inside generic code and Eigen matrices.
using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational,
                                               boost::multiprecision::et_off>;

using MatrixQ = Eigen::Matrix<Rational, Eigen::Dynamic, Eigen::Dynamic>;
using VectorQ = Eigen::Matrix<Rational, Eigen::Dynamic, 1>;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

// Accepts "7", "-3/4", "12.25", "1e-3", "-.5". Decimal input is converted
// exactly (12.3 -> 123/10). Throws std::invalid_argument on malformed text.
Rational parse_rational(std::string_view text);

std::string to_string(const Rational& r);

Rational rational_pow(const Rational& base, int exponent);
Rational factorial(int k);

MatrixQ to_rational(const Eigen::MatrixXd& m);
Eigen::MatrixXd to_double(const MatrixQ& m);

}  // namespace pie

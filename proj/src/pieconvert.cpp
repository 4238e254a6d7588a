#include "pie/pieconvert.hpp"

namespace pie {

template PIESystem<Rational> build_pie<Rational>(const PDESpec&);
template PIESystem<double> build_pie<double>(const PDESpec&);

}  // namespace pie

#include "pie/affine.hpp"

#include <algorithm>

namespace pie {

namespace {

Affine merge(const Affine& a, const Affine& b, double sb) {
  Affine r(a.c0 + sb * b.c0);
  r.w.reserve(a.w.size() + b.w.size());
  auto i = a.w.begin(), j = b.w.begin();
  while (i != a.w.end() || j != b.w.end()) {
    if (j == b.w.end() || (i != a.w.end() && i->first < j->first)) {
      r.w.push_back(*i++);
    } else if (i == a.w.end() || j->first < i->first) {
      r.w.emplace_back(j->first, sb * j->second);
      ++j;
    } else {
      double v = i->second + sb * j->second;
      if (v != 0.0) r.w.emplace_back(i->first, v);
      ++i;
      ++j;
    }
  }
  return r;
}

}  // namespace

Affine operator+(const Affine& a, const Affine& b) { return merge(a, b, 1.0); }
Affine operator-(const Affine& a, const Affine& b) { return merge(a, b, -1.0); }

Affine operator-(const Affine& a) {
  Affine r = a;
  r.c0 = -r.c0;
  for (auto& t : r.w) t.second = -t.second;
  return r;
}

Affine operator*(const Affine& a, double s) {
  if (s == 0.0) return {};
  Affine r = a;
  r.c0 *= s;
  for (auto& t : r.w) t.second *= s;
  return r;
}

std::string ScalarTraits<Affine>::str(const Affine& x) {
  std::string out = "(" + ScalarTraits<double>::str(x.c0);
  for (const auto& [id, v] : x.w)
    out += " + " + ScalarTraits<double>::str(v) + "*x" + std::to_string(id);
  return out + ")";
}

Affine ScalarTraits<Affine>::sum(const std::pair<Monomial, Affine>* b,
                                 const std::pair<Monomial, Affine>* e) {
  Affine r;
  std::size_t n = 0;
  for (auto p = b; p != e; ++p) n += p->second.w.size();
  std::vector<std::pair<int, double>> all;
  all.reserve(n);
  for (auto p = b; p != e; ++p) {
    r.c0 += p->second.c0;
    all.insert(all.end(), p->second.w.begin(), p->second.w.end());
  }
  std::sort(all.begin(), all.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  for (std::size_t i = 0; i < all.size();) {
    double v = 0;
    std::size_t j = i;
    for (; j < all.size() && all[j].first == all[i].first; ++j) v += all[j].second;
    if (v != 0.0) r.w.emplace_back(all[i].first, v);
    i = j;
  }
  return r;
}

Polynomial<double> evaluate_affine(const AffinePoly& p, const std::vector<double>& x) {
  return convert<double>(p, [&](const Affine& a) { return a.eval(x); });
}

MatPoly<double> evaluate_affine(const MatPoly<Affine>& m, const std::vector<double>& x) {
  return m.map([&](const AffinePoly& p) { return evaluate_affine(p, x); });
}

}  // namespace pie

#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "bermudan/csv.hpp"
#include "bermudan/superhedge.hpp"

namespace bermudan {

// Superhedge files: columns grid,phi,psi,theta1,theta2 on the union of the
// four grids. Reading gives all four functions the same grid.

inline CsvTable hedge_table(const Superhedge& h) {
  std::vector<double> g;
  for (const GridFunction* f : {&h.phi, &h.psi, &h.theta1, &h.theta2})
    g.insert(g.end(), f->grid().begin(), f->grid().end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  CsvTable t;
  t.columns = {"grid", "phi", "psi", "theta1", "theta2"};
  for (double x : g) t.rows.push_back({x, h.phi(x), h.psi(x), h.theta1(x), h.theta2(x)});
  return t;
}

inline void write_hedge(std::ostream& os, const Superhedge& h) { write_csv(os, hedge_table(h)); }

inline Superhedge read_hedge(std::istream& is) {
  const CsvTable t = read_csv(is);
  std::vector<int> col;
  for (const char* name : {"grid", "phi", "psi", "theta1", "theta2"}) {
    col.push_back(t.column(name));
    require(col.back() >= 0, ErrorKind::invalid_scenario, std::string("hedge file lacks column '") + name + "'");
  }
  require(t.rows.size() >= 2, ErrorKind::invalid_scenario, "hedge file needs at least two rows");
  std::vector<double> v[5];
  for (const auto& r : t.rows)
    for (int k = 0; k < 5; ++k) v[k].push_back(r[col[k]]);
  for (std::size_t i = 0; i < v[0].size(); ++i) {
    for (int k = 0; k < 5; ++k)
      require(std::isfinite(v[k][i]), ErrorKind::invalid_scenario, "hedge file holds a non-finite value");
    require(i == 0 || v[0][i] > v[0][i - 1], ErrorKind::invalid_scenario, "hedge grid must increase strictly");
  }
  Superhedge h;
  h.phi = GridFunction(v[0], v[1]);
  h.psi = GridFunction(v[0], v[2]);
  h.theta1 = GridFunction(v[0], v[3]);
  h.theta2 = GridFunction(v[0], v[4]);
  return h;
}

inline Superhedge load_hedge(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::invalid_scenario, "cannot open " + path);
  return read_hedge(in);
}

}  // namespace bermudan

#include "splitstoch/trace_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace splitstoch {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // \n line endings everywhere
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

void write_trace_csv(const std::string& path,
                     const std::vector<TraceRecord>& trace) {
  std::ofstream out = open_out(path);
  out << "k,stopping_error,consensus_max,phi,h_value,lyapunov,prox_calls,"
         "grad_calls,elapsed_s\n";
  for (const TraceRecord& r : trace) {
    out << r.k << ',' << format_double(r.stopping_error) << ','
        << format_double(r.consensus_max) << ',' << format_double(r.phi) << ','
        << format_double(r.h_value) << ',';
    if (r.lyapunov) out << format_double(*r.lyapunov);
    out << ',' << r.prox_calls << ',' << r.grad_calls << ',';
    if (r.elapsed_s) out << format_double(*r.elapsed_s);
    out << '\n';
  }
}

void write_aggregate_csv(const std::string& path,
                         const std::vector<std::vector<TraceRecord>>& runs) {
  std::ofstream out = open_out(path);
  out << "k,n_runs,stopping_error_mean,stopping_error_std,consensus_max_mean,"
         "consensus_max_std,phi_mean,phi_std,h_value_mean,h_value_std\n";
  size_t longest = 0;
  for (const auto& t : runs) longest = std::max(longest, t.size());

  for (size_t row = 0; row < longest; ++row) {
    long k = 0;
    std::vector<std::array<double, 4>> values;
    for (const auto& t : runs) {
      if (row < t.size()) {
        k = t[row].k;
        values.push_back(
            {t[row].stopping_error, t[row].consensus_max, t[row].phi, t[row].h_value});
      }
    }
    out << k << ',' << values.size();
    for (int c = 0; c < 4; ++c) {
      double mean = 0.0;
      for (const auto& v : values) mean += v[static_cast<size_t>(c)];
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      if (values.size() > 1) {
        for (const auto& v : values) {
          const double d = v[static_cast<size_t>(c)] - mean;
          var += d * d;
        }
        var /= static_cast<double>(values.size() - 1);
      }
      out << ',' << format_double(mean) << ',' << format_double(std::sqrt(var));
    }
    out << '\n';
  }
}

void write_recovered_csv(const std::string& path, const Vector& x,
                         const Vector& x_true) {
  if (x.size() != x_true.size())
    throw std::invalid_argument("recovered/true signals differ in length");
  std::ofstream out = open_out(path);
  out << "recovered,true\n";
  for (Eigen::Index j = 0; j < x.size(); ++j)
    out << format_double(x[j]) << ',' << format_double(x_true[j]) << '\n';
}

}  // namespace splitstoch

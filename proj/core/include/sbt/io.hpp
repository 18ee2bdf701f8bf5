#pragma once

// Text and binary serialisation of trajectories and path ensembles.
//
// SBK layout: the 5 bytes "SBKL1", an 80-byte JSON shape descriptor padded with
// spaces, then little-endian float64 arrays: times[n_times], xs[n_paths*n_times]
// and, when the descriptor's "cols" is "txu", us[n_paths*n_times].

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "sbt/stochastic.hpp"

namespace sbt::io {

/// Shortest representation that reads back to the same double ("." decimal, no locale).
std::string format_double(double v);

/// CSV with header `path,t,x,u`; the u column is empty for scalar ensembles.
void write_ensemble_csv(std::ostream& os, const PathEnsemble& e);

void write_sbk(std::ostream& os, const PathEnsemble& e);

struct SbkBlock {
  std::size_t n_paths = 0;
  std::size_t n_times = 0;
  std::vector<double> times, xs, us;
};

/// Throws std::runtime_error on a malformed block.
SbkBlock read_sbk(std::istream& is);

/// Writes CSV for ".csv" and SBK for ".sbk"; any other extension is a DomainError.
void save_ensemble(const std::filesystem::path& path, const PathEnsemble& e);

}  // namespace sbt::io

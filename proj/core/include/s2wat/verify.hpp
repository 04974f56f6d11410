#pragma once

#include <iosfwd>

namespace s2wat {

/// Fast self-check of the core invariants (roundtrips, attention row sums,
/// fusion oracle, counter exactness, file-format roundtrips, determinism).
/// Prints one ok/FAIL line per check; returns true when everything passed.
bool run_verify(std::ostream& out);

}  // namespace s2wat

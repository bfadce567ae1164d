// tests/mer_oracle.h

// Copyright 2026 The csasr Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Reference edit distance: memoized recursion over suffixes, tracking
// (edits, insertions, substitutions) and keeping the lexicographic minimum of
// (edits, insertions).

#ifndef CSASR_TESTS_MER_ORACLE_H_
#define CSASR_TESTS_MER_ORACLE_H_

#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace csasr::testing_oracle {

struct OracleEdits {
  long edits = 0, ins = 0, subs = 0;
};

inline OracleEdits MinEdits(const std::vector<std::string>& r, const std::vector<std::string>& h) {
  std::map<std::pair<std::size_t, std::size_t>, OracleEdits> memo;
  auto key = [](const OracleEdits& e) { return std::make_tuple(e.edits, e.ins); };
  std::function<OracleEdits(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == r.size()) return OracleEdits{static_cast<long>(h.size() - j),
                                          static_cast<long>(h.size() - j), 0};
    if (j == h.size()) return OracleEdits{static_cast<long>(r.size() - i), 0, 0};
    auto it = memo.find({i, j});
    if (it != memo.end()) return it->second;
    OracleEdits best = go(i + 1, j + 1);
    if (r[i] != h[j]) {
      ++best.edits;
      ++best.subs;
    }
    OracleEdits d = go(i + 1, j);
    ++d.edits;
    OracleEdits n = go(i, j + 1);
    ++n.edits;
    ++n.ins;
    // Equal (edits, ins) pairs imply equal deletions, so subs agree too.
    if (key(d) < key(best)) best = d;
    if (key(n) < key(best)) best = n;
    memo[{i, j}] = best;
    return best;
  };
  return go(0, 0);
}

}  // namespace csasr::testing_oracle

#endif  // CSASR_TESTS_MER_ORACLE_H_

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bdlab::io {

// Fixed 17-significant-digit float formatting, used by every CSV writer so
// artifacts are byte-reproducible.
std::string g17(double v);

void write_csv_row(std::ostream& os, const std::vector<std::string>& cells);

}  // namespace bdlab::io

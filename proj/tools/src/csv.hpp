#pragma once

#include <string>
#include <vector>

namespace suite::cli {

/// CVR sample: header `draw_index,discrepancy`, one row per draw. The
/// discrepancy is the largest overstatement, in votes (-2..2), over the
/// contest's pairs. Rows are returned in draw_index order.
std::vector<int> read_cvr_sample(const std::string& path);

/// Polling sample: header `draw_index,interpretation`; the interpretation
/// is "w", "l", "u" or a candidate name. Rows are returned in draw_index
/// order.
std::vector<std::string> read_polling_sample(const std::string& path);

}  // namespace suite::cli

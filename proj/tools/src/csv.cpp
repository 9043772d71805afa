#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>

#include "suite/errors.hpp"

namespace suite::cli {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return c != ' ' && c != '\t' && c != '\r'; };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

template <typename T>
bool parse_int(const std::string& text, T& out) {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end;
}

struct Row {
    std::int64_t index;
    std::string value;
    std::size_t line;
};

// Rows of a two-column file, sorted by draw_index.
std::vector<Row> read_two_columns(const std::string& path, const std::string& second) {
    std::ifstream in(path);
    if (!in) throw InputError(path + ": cannot open sample file");
    const auto fail = [&](std::size_t line, const std::string& what) {
        throw InputError(path + ":" + std::to_string(line) + ": " + what);
    };

    std::vector<Row> rows;
    std::string raw;
    std::size_t line = 0;
    bool header = false;
    while (std::getline(in, raw)) {
        ++line;
        const std::string text = trim(raw);
        if (text.empty()) continue;
        const auto comma = text.find(',');
        if (comma == std::string::npos || text.find(',', comma + 1) != std::string::npos) {
            fail(line, "expected two comma-separated fields");
        }
        const std::string a = trim(text.substr(0, comma));
        const std::string b = trim(text.substr(comma + 1));
        if (!header) {
            if (a != "draw_index" || b != second) fail(line, "expected header draw_index," + second);
            header = true;
            continue;
        }
        std::int64_t index = 0;
        if (!parse_int(a, index) || index < 0) fail(line, "draw_index must be a nonnegative integer");
        if (b.empty()) fail(line, "empty " + second);
        rows.push_back({index, b, line});
    }
    if (!header) throw InputError(path + ":1: missing header draw_index," + second);

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& x, const Row& y) { return x.index < y.index; });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].index == rows[i - 1].index) {
            fail(std::max(rows[i].line, rows[i - 1].line),
                 "duplicate draw_index " + std::to_string(rows[i].index));
        }
    }
    return rows;
}

}  // namespace

std::vector<int> read_cvr_sample(const std::string& path) {
    std::vector<int> out;
    for (const auto& row : read_two_columns(path, "discrepancy")) {
        int d = 0;
        if (!parse_int(row.value, d) || d < -2 || d > 2) {
            throw InputError(path + ":" + std::to_string(row.line) +
                             ": discrepancy must be an integer in [-2, 2]");
        }
        out.push_back(d);
    }
    return out;
}

std::vector<std::string> read_polling_sample(const std::string& path) {
    std::vector<std::string> out;
    for (auto& row : read_two_columns(path, "interpretation")) out.push_back(std::move(row.value));
    return out;
}

}  // namespace suite::cli

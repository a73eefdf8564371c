#include "foval/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "foval/error.hpp"

namespace foval {

namespace {

const std::vector<std::string> kColumns = {
    "subject_id", "frame_index", "origin_l_x", "origin_l_y", "origin_l_z",
    "origin_r_x", "origin_r_y", "origin_r_z", "dir_l_x",    "dir_l_y",
    "dir_l_z",    "dir_r_x",    "dir_r_y",    "dir_r_z",    "gt_depth_cm"};

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_double(const std::string& cell, std::int64_t line, const std::string& column) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    // Tolerate surrounding spaces, nothing else.
    while (first != last && *first == ' ') ++first;
    while (last != first && *(last - 1) == ' ') --last;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw NonNumericCell(line, column);
    return value;
}

std::int64_t parse_int(const std::string& cell, std::int64_t line, const std::string& column) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) throw NonNumericCell(line, column);
    return value;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

const std::vector<std::string>& csv_columns() { return kColumns; }

std::vector<SubjectRecording> load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open '" + path + "' for reading");

    std::string line;
    if (!std::getline(in, line)) throw IoFailure("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const auto header = split_line(line);
    for (const auto& required : kColumns) {
        if (std::find(header.begin(), header.end(), required) == header.end())
            throw MissingColumn(required);
    }
    std::vector<std::size_t> col_index;
    col_index.reserve(kColumns.size());
    for (const auto& required : kColumns)
        col_index.push_back(static_cast<std::size_t>(
            std::find(header.begin(), header.end(), required) - header.begin()));

    std::vector<SubjectRecording> recordings;
    std::map<std::string, std::size_t> by_subject;

    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() < header.size())
            throw Error("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));

        auto cell = [&](std::size_t k) -> const std::string& { return cells[col_index[k]]; };
        auto num = [&](std::size_t k) { return parse_double(cell(k), line_no, kColumns[k]); };

        GazeSample s;
        const std::string& subject = cell(0);
        s.frame_index = parse_int(cell(1), line_no, kColumns[1]);
        if (s.frame_index < 0)
            throw Error("line " + std::to_string(line_no) + ": negative frame_index");
        s.origin_l = {num(2), num(3), num(4)};
        s.origin_r = {num(5), num(6), num(7)};
        s.dir_l = {num(8), num(9), num(10)};
        s.dir_r = {num(11), num(12), num(13)};
        if (s.dir_l.norm() == 0.0 || s.dir_r.norm() == 0.0) throw ZeroDirectionVector(line_no);

        const std::string& depth_cell = cell(14);
        if (!depth_cell.empty()) {
            s.gt_depth = num(14);
            if (!std::isfinite(s.gt_depth) || s.gt_depth < 0.0)
                throw Error("line " + std::to_string(line_no) + ": gt_depth_cm must be finite and >= 0");
        }

        auto [it, inserted] = by_subject.try_emplace(subject, recordings.size());
        if (inserted) recordings.push_back(SubjectRecording{subject, {}});
        recordings[it->second].samples.push_back(s);
    }

    for (auto& rec : recordings) {
        std::stable_sort(rec.samples.begin(), rec.samples.end(),
                         [](const GazeSample& a, const GazeSample& b) { return a.frame_index < b.frame_index; });
        for (std::size_t i = 1; i < rec.samples.size(); ++i) {
            if (rec.samples[i].frame_index == rec.samples[i - 1].frame_index)
                throw Error("subject '" + rec.subject_id + "': duplicate frame_index " +
                            std::to_string(rec.samples[i].frame_index));
        }
    }
    return recordings;
}

void save_csv(const std::vector<SubjectRecording>& recordings, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot open '" + path + "' for writing");

    for (std::size_t i = 0; i < kColumns.size(); ++i) {
        if (i) out << ',';
        out << kColumns[i];
    }
    out << '\n';

    for (const auto& rec : recordings) {
        for (const auto& s : rec.samples) {
            out << rec.subject_id << ',' << s.frame_index;
            const double nums[12] = {s.origin_l.x, s.origin_l.y, s.origin_l.z, s.origin_r.x,
                                     s.origin_r.y, s.origin_r.z, s.dir_l.x,    s.dir_l.y,
                                     s.dir_l.z,    s.dir_r.x,    s.dir_r.y,    s.dir_r.z};
            for (double v : nums) out << ',' << format_double(v);
            out << ',';
            if (s.has_depth()) out << format_double(s.gt_depth);
            out << '\n';
        }
    }
    if (!out) throw IoFailure("write to '" + path + "' failed");
}

} // namespace foval

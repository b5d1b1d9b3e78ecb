#include "shiftscope/csvio.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "shiftscope/errors.hpp"

namespace shiftscope {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

// std::stod would reject subnormals (glibc flags them ERANGE), which
// format_double legitimately emits; from_chars round-trips every double.
double parse_double(const std::string& field) {
    double value = 0.0;
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), last, value);
    if (ec != std::errc{} || ptr != last)
        throw DataError("not a number: '" + field + "'");
    return value;
}

void write_csv(const std::filesystem::path& path, const std::string& provenance,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    if (!provenance.empty()) out << "# " << provenance << "\n";
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(header[i]);
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(row[i]);
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

void write_csv(const std::filesystem::path& path, const CsvTable& table,
               const std::string& provenance) {
    write_csv(path, provenance, table.header, table.rows);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file: " + path.string());
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << content;
    if (!out) throw DataError("write failed: " + path.string());
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace shiftscope

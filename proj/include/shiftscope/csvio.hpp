#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace shiftscope {

// Minimal CSV layer for the pipeline's flat artifacts. Fields are written
// verbatim except when they contain a comma, quote or newline, in which case
// they are double-quoted. Lines starting with '#' are provenance comments
// and are skipped on read.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 if absent
};

std::string csv_escape(const std::string& field);
std::string format_double(double v);  // shortest round-trip form, deterministic
double parse_double(const std::string& field);  // inverse of format_double; DataError on junk

void write_csv(const std::filesystem::path& path, const std::string& provenance,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
void write_csv(const std::filesystem::path& path, const CsvTable& table,
               const std::string& provenance = {});

CsvTable read_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace shiftscope

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fluxonium/fitting.hpp"
#include "fluxonium/timeseries.hpp"

namespace fluxonium::io {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary file next to `path` and renames it into place.
void atomic_write(const std::filesystem::path& path, std::string_view content);

nlohmann::json read_json(const std::filesystem::path& path);

/// Numeric CSV with a header row. Lines starting with '#' are comments;
/// "# key=value" comments are returned in `meta`.
struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::map<std::string, std::string> meta;

    std::size_t column(std::string_view name) const;  ///< throws DataError when absent
    std::vector<double> values(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);
std::string to_csv(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows,
                   const std::vector<std::string>& header_comments = {});

/// Columns phi_ext, frequency_ghz, label (ge|gf|unassigned), optional weight.
SpectroscopyDataset parse_spectroscopy_csv(std::string_view text);
std::string to_csv(const SpectroscopyDataset& data, const std::vector<std::string>& header_comments = {});

/// Binary layout: "IQTRACE1", f64 dt_us, u64 count, count x (f64 I, f64 Q),
/// little endian.
std::string to_binary(const IQTrace& trace);
IQTrace parse_binary_trace(std::string_view bytes);
/// CSV: "# dt_us=<dt>" header, columns t_us, i, q.
std::string to_csv(const IQTrace& trace, const std::vector<std::string>& header_comments = {});
IQTrace parse_trace_csv(std::string_view text);
/// Dispatches on the magic bytes.
IQTrace read_trace(const std::filesystem::path& path);

std::string to_csv(const PsdEstimate& psd, const std::vector<std::string>& header_comments = {});

}  // namespace fluxonium::io

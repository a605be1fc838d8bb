#include "fluxonium/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "fluxonium/errors.hpp"

namespace fluxonium::io {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_number(std::string_view s, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError("CSV line " + std::to_string(line) + ": '" + std::string(s) + "' is not a number");
    }
    return v;
}

template <class F>
void for_each_line(std::string_view text, F&& f) {
    std::size_t start = 0, number = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++number;
        f(trim(text.substr(start, end - start)), number);
        start = end + 1;
    }
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
    return v;
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::string_view bytes, std::size_t offset) { return std::bit_cast<double>(get_u64(bytes, offset)); }

constexpr std::string_view kTraceMagic = "IQTRACE1";

void append_comments(std::string& out, const std::vector<std::string>& comments) {
    for (const auto& c : comments) out += "# " + c + "\n";
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const std::filesystem::path& path) { return fnv1a64_hex(read_file(path)); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot move '" + tmp.string() + "' into place: " + ec.message());
    }
}

nlohmann::json read_json(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (columns[k] == name) return k;
    }
    throw DataError("CSV has no column '" + std::string(name) + "'");
}

std::vector<double> CsvTable::values(std::string_view name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    bool have_header = false;
    for_each_line(text, [&](std::string_view line, std::size_t number) {
        if (line.empty()) return;
        if (line.front() == '#') {
            const std::string_view body = trim(line.substr(1));
            const std::size_t eq = body.find('=');
            if (eq != std::string_view::npos) {
                table.meta[std::string(trim(body.substr(0, eq)))] = std::string(trim(body.substr(eq + 1)));
            }
            return;
        }
        const auto cells = split(line, ',');
        if (!have_header) {
            for (auto c : cells) table.columns.emplace_back(c);
            have_header = true;
            return;
        }
        if (cells.size() != table.columns.size()) {
            throw DataError("CSV line " + std::to_string(number) + ": expected " +
                            std::to_string(table.columns.size()) + " fields, found " + std::to_string(cells.size()));
        }
        std::vector<double> row;
        for (auto c : cells) row.push_back(parse_number(c, number));
        table.rows.push_back(std::move(row));
    });
    if (!have_header) throw DataError("CSV has no header row");
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

std::string to_csv(const std::vector<std::string>& columns, const std::vector<std::vector<double>>& rows,
                   const std::vector<std::string>& header_comments) {
    std::string out;
    append_comments(out, header_comments);
    for (std::size_t k = 0; k < columns.size(); ++k) out += (k ? "," : "") + columns[k];
    out += "\n";
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.size(); ++k) out += (k ? "," : "") + format_double(r[k]);
        out += "\n";
    }
    return out;
}

SpectroscopyDataset parse_spectroscopy_csv(std::string_view text) {
    SpectroscopyDataset data;
    std::vector<std::string> columns;
    for_each_line(text, [&](std::string_view line, std::size_t number) {
        if (line.empty() || line.front() == '#') return;
        const auto cells = split(line, ',');
        if (columns.empty()) {
            for (auto c : cells) columns.emplace_back(c);
            if (columns.size() < 3 || columns[0] != "phi_ext" || columns[1] != "frequency_ghz" ||
                columns[2] != "label" || (columns.size() == 4 && columns[3] != "weight") || columns.size() > 4) {
                throw DataError("spectroscopy CSV header must be phi_ext,frequency_ghz,label[,weight]");
            }
            return;
        }
        if (cells.size() != columns.size()) {
            throw DataError("spectroscopy CSV line " + std::to_string(number) + ": wrong field count");
        }
        SpectroscopyPoint p;
        p.phi_ext = parse_number(cells[0], number);
        p.frequency = parse_number(cells[1], number);
        try {
            p.label = transition_label_from_string(cells[2]);
        } catch (const Error&) {
            throw DataError("spectroscopy CSV line " + std::to_string(number) + ": unknown label '" +
                            std::string(cells[2]) + "'");
        }
        if (cells.size() == 4) p.weight = parse_number(cells[3], number);
        data.points.push_back(p);
    });
    if (columns.empty()) throw DataError("spectroscopy CSV has no header row");
    return data;
}

std::string to_csv(const SpectroscopyDataset& data, const std::vector<std::string>& header_comments) {
    std::string out;
    append_comments(out, header_comments);
    out += "phi_ext,frequency_ghz,label,weight\n";
    for (const auto& p : data.points) {
        out += format_double(p.phi_ext) + "," + format_double(p.frequency) + "," + std::string(to_string(p.label)) +
               "," + format_double(p.weight) + "\n";
    }
    return out;
}

std::string to_binary(const IQTrace& trace) {
    std::string out(kTraceMagic);
    put_f64(out, trace.dt);
    put_u64(out, trace.samples.size());
    for (const auto& z : trace.samples) {
        put_f64(out, z.real());
        put_f64(out, z.imag());
    }
    return out;
}

IQTrace parse_binary_trace(std::string_view bytes) {
    if (bytes.size() < 24 || bytes.substr(0, 8) != kTraceMagic) throw DataError("not an IQTRACE1 file");
    IQTrace trace;
    trace.dt = get_f64(bytes, 8);
    const std::uint64_t count = get_u64(bytes, 16);
    if (bytes.size() != 24 + 16 * count) {
        throw DataError("IQTRACE1 size mismatch: header says " + std::to_string(count) + " samples");
    }
    trace.samples.resize(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        trace.samples[k] = {get_f64(bytes, 24 + 16 * k), get_f64(bytes, 32 + 16 * k)};
    }
    validate(trace);
    return trace;
}

std::string to_csv(const IQTrace& trace, const std::vector<std::string>& header_comments) {
    std::string out;
    append_comments(out, header_comments);
    out += "# dt_us=" + format_double(trace.dt) + "\n";
    out += "t_us,i,q\n";
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        out += format_double(double(k) * trace.dt) + "," + format_double(trace.samples[k].real()) + "," +
               format_double(trace.samples[k].imag()) + "\n";
    }
    return out;
}

IQTrace parse_trace_csv(std::string_view text) {
    const CsvTable table = parse_csv(text);
    const auto it = table.meta.find("dt_us");
    if (it == table.meta.end()) throw DataError("trace CSV needs a '# dt_us=' header");
    IQTrace trace;
    trace.dt = parse_number(it->second, 0);
    const auto i = table.values("i");
    const auto q = table.values("q");
    trace.samples.resize(i.size());
    for (std::size_t k = 0; k < i.size(); ++k) trace.samples[k] = {i[k], q[k]};
    validate(trace);
    return trace;
}

IQTrace read_trace(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.compare(0, kTraceMagic.size(), kTraceMagic) == 0) return parse_binary_trace(bytes);
    return parse_trace_csv(bytes);
}

std::string to_csv(const PsdEstimate& psd, const std::vector<std::string>& header_comments) {
    std::vector<std::string> comments = header_comments;
    comments.push_back("n_averages=" + std::to_string(psd.n_averages));
    comments.push_back("duration_s=" + format_double(psd.total_duration));
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < psd.frequencies.size(); ++k) rows.push_back({psd.frequencies[k], psd.power[k]});
    return to_csv({"f_hz", "s_hz2_per_hz"}, rows, comments);
}

}  // namespace fluxonium::io

#pragma once

// Wavelength-sampled intensity data and its delimited-text file format:
//
//   # label: on-cavity
//   # integration_time_s: 1
//   # power_mW: 20
//   wavelength_nm,counts
//   572.1,103.5
//   ...
//
// Columns may be separated by commas, tabs or spaces. A non-numeric first data line
// is taken as a column header.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace fpcav
{
struct MeasuredSpectrum
{
    std::vector<double> wavelengths_nm;
    std::vector<double> counts;
    std::optional<double> integration_time_s;
    std::optional<double> power_mW;
    std::string label;

    std::size_t size() const { return wavelengths_nm.size(); }
};

inline void validate(const MeasuredSpectrum &s)
{
    if (s.wavelengths_nm.size() != s.counts.size())
        throw invalid_argument("spectrum: wavelength and count arrays differ in length");
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        if (!std::isfinite(s.wavelengths_nm[i]) || !std::isfinite(s.counts[i]))
            throw invalid_argument("spectrum: non-finite value");
        if (s.counts[i] < 0.0)
            throw invalid_argument("spectrum: negative counts");
        if (i > 0 && !(s.wavelengths_nm[i] > s.wavelengths_nm[i - 1]))
            throw invalid_argument("spectrum: wavelengths must be strictly increasing");
    }
    if (s.integration_time_s && !(*s.integration_time_s > 0.0))
        throw invalid_argument("spectrum: integration time must be positive");
    if (s.power_mW && !(*s.power_mW > 0.0))
        throw invalid_argument("spectrum: power must be positive");
}

namespace io
{
namespace detail
{
inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(std::string_view s)
{
    s = trim(s);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size())
    {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == ','))
            ++i;
        if (i >= line.size())
            break;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != ',')
            ++j;
        out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}
} // namespace detail

inline MeasuredSpectrum read_spectrum(std::istream &in)
{
    MeasuredSpectrum s;
    std::string raw;
    std::size_t line_no = 0;
    bool seen_data = false;
    while (std::getline(in, raw))
    {
        ++line_no;
        const auto line = detail::trim(raw);
        if (line.empty())
            continue;
        if (line.front() == '#')
        {
            auto body = detail::trim(line.substr(1));
            const auto sep = body.find_first_of(":=");
            if (sep == std::string_view::npos)
                continue;
            const auto key = detail::trim(body.substr(0, sep));
            const auto value = detail::trim(body.substr(sep + 1));
            auto number = [&]() {
                auto v = detail::parse_number(value);
                if (!v)
                    throw format_error("line " + std::to_string(line_no) + ": '" + std::string(key) +
                                       "' is not a number");
                return *v;
            };
            if (key == "integration_time_s")
                s.integration_time_s = number();
            else if (key == "power_mW")
                s.power_mW = number();
            else if (key == "label")
                s.label = std::string(value);
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (fields.size() < 2)
            throw format_error("line " + std::to_string(line_no) + ": expected two columns");
        auto x = detail::parse_number(fields[0]);
        auto y = detail::parse_number(fields[1]);
        if (!x || !y)
        {
            if (!seen_data && s.wavelengths_nm.empty())
            {
                seen_data = true; // column header
                continue;
            }
            throw format_error("line " + std::to_string(line_no) + ": non-numeric data");
        }
        seen_data = true;
        s.wavelengths_nm.push_back(*x);
        s.counts.push_back(*y);
    }
    try
    {
        validate(s);
    }
    catch (const invalid_argument &e)
    {
        throw format_error(e.what());
    }
    return s;
}

inline std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline void write_spectrum(std::ostream &out, const MeasuredSpectrum &s)
{
    if (!s.label.empty())
        out << "# label: " << s.label << '\n';
    if (s.integration_time_s)
        out << "# integration_time_s: " << format_number(*s.integration_time_s) << '\n';
    if (s.power_mW)
        out << "# power_mW: " << format_number(*s.power_mW) << '\n';
    out << "wavelength_nm,counts\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        out << format_number(s.wavelengths_nm[i]) << ',' << format_number(s.counts[i]) << '\n';
}

} // namespace io
} // namespace fpcav

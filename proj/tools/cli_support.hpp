#pragma once

// Plumbing shared by the subcommands: exit codes, reports, artifacts, input helpers.

#include <filesystem>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include <fpcav/fpcav.hpp>

namespace fpcav::cli
{
using json = nlohmann::ordered_json;

enum ExitCode : int
{
    exit_ok = 0,
    exit_usage = 2,
    exit_format = 3,
    exit_numeric = 4
};

// Missing or contradictory options, unreadable paths.
class usage_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Data files written next to the report. Names are relative to the output directory so
// the report itself does not depend on where it was written.
class Artifacts
{
public:
    explicit Artifacts(std::string dir) : dir_(std::move(dir))
    {
        if (dir_.empty())
            return;
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec || !std::filesystem::is_directory(dir_))
            throw usage_error("cannot create output directory '" + dir_ + "'");
    }

    bool enabled() const { return !dir_.empty(); }

    void write(const std::string &name, const std::function<void(std::ostream &)> &fill)
    {
        if (!enabled())
            return;
        const auto path = std::filesystem::path(dir_) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw usage_error("cannot write '" + path.string() + "'");
        fill(out);
        if (!out)
            throw usage_error("write failed for '" + path.string() + "'");
        names_.push_back(name);
    }

    json list() const
    {
        json a = json::array();
        for (const auto &n : names_)
            a.push_back(n);
        return a;
    }

private:
    std::string dir_;
    std::vector<std::string> names_;
};

inline void csv_row(std::ostream &out, std::initializer_list<double> values)
{
    bool first = true;
    for (double v : values)
    {
        if (!first)
            out << ',';
        out << io::format_number(v);
        first = false;
    }
    out << '\n';
}

// quantity,value table from a flat report object; nested values are skipped.
inline void write_key_values(std::ostream &out, const json &j, const std::string &prefix = "")
{
    if (prefix.empty())
        out << "quantity,value\n";
    for (const auto &[k, v] : j.items())
    {
        if (v.is_number())
            out << prefix << k << ',' << io::format_number(v.get<double>()) << '\n';
        else if (v.is_boolean())
            out << prefix << k << ',' << (v.get<bool>() ? 1 : 0) << '\n';
        else if (v.is_object())
            write_key_values(out, v, prefix + k + '.');
    }
}

inline std::ifstream open_input(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw usage_error("cannot open '" + path + "'");
    return in;
}

inline MeasuredSpectrum read_two_column(const std::string &path)
{
    auto in = open_input(path);
    try
    {
        return io::read_spectrum(in);
    }
    catch (const format_error &e)
    {
        throw format_error(path + ": " + e.what());
    }
}

struct StackSource
{
    std::string file;
    std::string mirror; // bottom, top or cavity, from the defaults
};

inline LayerStack resolve_stack(const StackSource &src, const Defaults &d)
{
    if (!src.file.empty())
    {
        auto in = open_input(src.file);
        try
        {
            return io::read_stack(in, d.registry);
        }
        catch (const format_error &e)
        {
            throw format_error(src.file + ": " + e.what());
        }
    }
    if (src.mirror == "bottom")
        return d.bottom_mirror;
    if (src.mirror == "top")
        return d.top_mirror;
    if (src.mirror == "cavity")
        return flatten(d.cavity());
    throw usage_error("a stack is required: --stack FILE or --mirror bottom|top|cavity");
}

inline json stack_summary(const LayerStack &s)
{
    return {{"incident", s.incident.name},
            {"exit", s.exit.name},
            {"layer_count", s.layers.size()},
            {"total_thickness_nm", s.total_thickness_nm()}};
}

inline double default_stokes_nm(const Defaults &d) { return raman::stokes_wavelength(d.pump_nm, d.shift_invcm); }

class SelfTest
{
public:
    void check(const std::string &name, bool pass, json detail = json::object())
    {
        json c{{"name", name}, {"pass", pass}};
        for (auto &[k, v] : detail.items())
            c[k] = v;
        checks_.push_back(std::move(c));
        ok_ = ok_ && pass;
    }

    // A check whose body may throw; a throw counts as a failure.
    void attempt(const std::string &name, const std::function<void(SelfTest &)> &body)
    {
        try
        {
            body(*this);
        }
        catch (const std::exception &e)
        {
            check(name, false, {{"exception", e.what()}});
        }
    }

    bool ok() const { return ok_; }

    json report(const std::string &command) const
    {
        return {{"command", command}, {"selftest", checks_}, {"passed", ok_}};
    }

private:
    json checks_ = json::array();
    bool ok_ = true;
};

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }
inline bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::abs(b); }

} // namespace fpcav::cli

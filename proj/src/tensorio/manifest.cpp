#include "blindspot/tensorio/manifest.hpp"

#include <fstream>
#include <set>

#include "blindspot/error.hpp"
#include "blindspot/tensorio/cbfm.hpp"

namespace blindspot::tensorio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

RowRef row_ref_from_json(const json& j, const fs::path& base_dir)
{
    RowRef r;
    const fs::path p = j.at("path").get<std::string>();
    r.path = p.is_absolute() ? p : base_dir / p;
    r.row_start = j.at("row_start").get<std::size_t>();
    r.row_count = j.at("row_count").get<std::size_t>();
    return r;
}

json row_ref_to_json(const RowRef& r, const fs::path& base_dir)
{
    fs::path p = r.path;
    if (!base_dir.empty() && p.is_absolute()) {
        p = fs::relative(p, fs::absolute(base_dir));
    } else if (!base_dir.empty()) {
        p = p.lexically_relative(base_dir);
    }
    return {{"path", p.generic_string()}, {"row_start", r.row_start}, {"row_count", r.row_count}};
}

} // namespace

DatasetManifest manifest_from_json(const json& j, const fs::path& base_dir)
{
    DatasetManifest m;
    try {
        m.version = j.at("version").get<int>();
        m.tokens_per_image = j.at("tokens_per_image").get<std::size_t>();
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.caption_id = e.at("caption_id").get<std::string>();
            entry.caption = e.value("caption", std::string{});
            entry.real = row_ref_from_json(e.at("real"), base_dir);
            if (e.contains("gen")) {
                for (const auto& [model, ref] : e.at("gen").items()) {
                    entry.gen.emplace(model, row_ref_from_json(ref, base_dir));
                }
            }
            m.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::Validation, std::string("malformed manifest: ") + ex.what());
    }
    if (m.version != 1) {
        throw Error(ErrorKind::Validation, "unsupported manifest version " + std::to_string(m.version));
    }
    return m;
}

json manifest_to_json(const DatasetManifest& m, const fs::path& base_dir)
{
    json entries = json::array();
    for (const auto& e : m.entries) {
        json gen = json::object();
        for (const auto& [model, ref] : e.gen) {
            gen[model] = row_ref_to_json(ref, base_dir);
        }
        entries.push_back({{"caption_id", e.caption_id},
                           {"caption", e.caption},
                           {"real", row_ref_to_json(e.real, base_dir)},
                           {"gen", gen}});
    }
    return {{"version", m.version}, {"tokens_per_image", m.tokens_per_image}, {"entries", entries}};
}

void validate_manifest_structure(const DatasetManifest& m)
{
    if (m.tokens_per_image < 1) {
        throw Error(ErrorKind::Validation, "tokens_per_image must be >= 1");
    }
    std::set<std::string> seen;
    for (const auto& e : m.entries) {
        if (!seen.insert(e.caption_id).second) {
            throw Error(ErrorKind::Validation, "duplicate caption_id '" + e.caption_id + "'");
        }
        auto check = [&](const RowRef& r, const std::string& what) {
            if (r.row_count != m.tokens_per_image) {
                throw Error(ErrorKind::Validation, "caption_id '" + e.caption_id + "' " + what + ": row_count " +
                                                       std::to_string(r.row_count) + " != tokens_per_image " +
                                                       std::to_string(m.tokens_per_image));
            }
        };
        check(e.real, "real");
        for (const auto& [model, ref] : e.gen) {
            check(ref, "gen[" + model + "]");
        }
    }
}

DatasetManifest load_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Validation, "manifest not found: " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::Validation, "manifest " + path.string() + " is not valid JSON: " + ex.what());
    }
    auto m = manifest_from_json(j, path.parent_path());
    validate_manifest_structure(m);

    std::map<fs::path, std::uint64_t> rows_by_file;
    auto bound_check = [&](const RowRef& r, const std::string& id) {
        auto it = rows_by_file.find(r.path);
        if (it == rows_by_file.end()) {
            it = rows_by_file.emplace(r.path, read_feature_matrix_shape(r.path).first).first;
        }
        if (r.row_start + r.row_count > it->second) {
            throw Error(ErrorKind::Validation, "caption_id '" + id + "': rows [" + std::to_string(r.row_start) + ", " +
                                                   std::to_string(r.row_start + r.row_count) + ") exceed " +
                                                   r.path.string() + " (" + std::to_string(it->second) + " rows)");
        }
    };
    for (const auto& e : m.entries) {
        bound_check(e.real, e.caption_id);
        for (const auto& [model, ref] : e.gen) {
            bound_check(ref, e.caption_id);
        }
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write manifest " + path.string());
    }
    out << manifest_to_json(m, path.parent_path()).dump(2) << '\n';
}

std::vector<std::string> complete_models(const DatasetManifest& m)
{
    if (m.entries.empty()) {
        return {};
    }
    std::vector<std::string> out;
    for (const auto& [model, ref] : m.entries.front().gen) {
        bool all = true;
        for (const auto& e : m.entries) {
            all = all && e.gen.contains(model);
        }
        if (all) {
            out.push_back(model);
        }
    }
    return out;
}

PairedFeatures load_paired_features(const DatasetManifest& manifest, const std::string& model)
{
    std::vector<std::string> missing;
    for (const auto& e : manifest.entries) {
        if (!e.gen.contains(model)) {
            missing.push_back(e.caption_id);
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) {
            list += (list.empty() ? "" : ", ") + id;
        }
        throw Error(ErrorKind::Pairing, "model '" + model + "' missing for caption_ids: " + list);
    }

    std::map<fs::path, FeatureMatrix> cache;
    auto rows_of = [&](const RowRef& r) {
        auto it = cache.find(r.path);
        if (it == cache.end()) {
            it = cache.emplace(r.path, read_feature_matrix(r.path)).first;
        }
        return it->second.slice_rows(r.row_start, r.row_count);
    };

    std::vector<FeatureMatrix> real_parts;
    std::vector<FeatureMatrix> gen_parts;
    PairedFeatures out;
    for (const auto& e : manifest.entries) {
        real_parts.push_back(rows_of(e.real));
        gen_parts.push_back(rows_of(e.gen.at(model)));
        out.caption_ids.push_back(e.caption_id);
    }
    out.real = vstack(real_parts);
    out.gen = vstack(gen_parts);
    if (out.real.cols() != out.gen.cols() && !out.real.empty()) {
        throw Error(ErrorKind::Shape, "real features have " + std::to_string(out.real.cols()) +
                                          " columns, generated have " + std::to_string(out.gen.cols()));
    }
    out.grouping = {manifest.tokens_per_image, manifest.entries.size()};
    return out;
}

} // namespace blindspot::tensorio

#include "swarmbus/store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <system_error>

#include "swarmbus/errors.hpp"

namespace fs = std::filesystem;

namespace swarmbus {

bool is_store_key(const std::string& key) {
    if (key.empty() || key.size() > 128 || key.front() == '.') return false;
    return std::all_of(key.begin(), key.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '-' || c == '_' || c == '.';
    });
}

namespace {

void require_key(const std::string& key, const char* what) {
    if (!is_store_key(key)) fail(Errc::INVALID_ARGUMENT, std::string("bad store ") + what);
}

} // namespace

ErasureOutcome SubjectStore::erase_subject_data(const std::string& subject_id) {
    ErasureOutcome out;
    out.target_name = name();
    out.items_deleted = erase_subject(subject_id);
    return out;
}

std::vector<std::string> SubjectStore::residual_scan(const std::string& subject_id) const {
    std::vector<std::string> findings;
    for (const std::string& s : subjects()) {
        for (const std::string& item : list_items(s)) {
            if (s == subject_id) {
                findings.push_back(name() + "/" + s + "/" + item);
                continue;
            }
            auto value = get(s, item);
            if (value && envelope::encode(*value).find(subject_id) != std::string::npos)
                findings.push_back(name() + "/" + s + "/" + item + " (byte match)");
        }
    }
    return findings;
}

void MemoryStore::put(const std::string& subject_id, const std::string& item_id,
                      const envelope::Value& value) {
    require_key(subject_id, "subject");
    require_key(item_id, "item");
    std::lock_guard lock(mutex_);
    items_[subject_id][item_id] = value;
}

std::optional<envelope::Value> MemoryStore::get(const std::string& subject_id,
                                                const std::string& item_id) const {
    require_key(subject_id, "subject");
    require_key(item_id, "item");
    std::lock_guard lock(mutex_);
    auto s = items_.find(subject_id);
    if (s == items_.end()) return std::nullopt;
    auto i = s->second.find(item_id);
    if (i == s->second.end()) return std::nullopt;
    return i->second;
}

std::vector<std::string> MemoryStore::list_items(const std::string& subject_id) const {
    require_key(subject_id, "subject");
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    auto s = items_.find(subject_id);
    if (s != items_.end())
        for (const auto& [item, _] : s->second) out.push_back(item);
    return out;
}

std::vector<std::string> MemoryStore::subjects() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [subject, items] : items_)
        if (!items.empty()) out.push_back(subject);
    return out;
}

bool MemoryStore::remove(const std::string& subject_id, const std::string& item_id) {
    require_key(subject_id, "subject");
    require_key(item_id, "item");
    std::lock_guard lock(mutex_);
    auto s = items_.find(subject_id);
    if (s == items_.end()) return false;
    bool erased = s->second.erase(item_id) > 0;
    if (s->second.empty()) items_.erase(s);
    return erased;
}

std::size_t MemoryStore::erase_subject(const std::string& subject_id) {
    require_key(subject_id, "subject");
    std::lock_guard lock(mutex_);
    auto s = items_.find(subject_id);
    if (s == items_.end()) return 0;
    std::size_t n = s->second.size();
    items_.erase(s);
    return n;
}

FileStore::FileStore(std::string root_dir, std::string name)
    : root_(std::move(root_dir)), name_(std::move(name)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) fail(Errc::STORE_UNAVAILABLE, "cannot create store dir " + root_ + ": " + ec.message());
}

std::string FileStore::subject_dir(const std::string& subject_id) const {
    return root_ + "/" + subject_id;
}

std::string FileStore::item_path(const std::string& subject_id, const std::string& item_id) const {
    return subject_dir(subject_id) + "/" + item_id + ".json";
}

void FileStore::put(const std::string& subject_id, const std::string& item_id,
                    const envelope::Value& value) {
    require_key(subject_id, "subject");
    require_key(item_id, "item");
    std::lock_guard lock(mutex_);
    std::error_code ec;
    fs::create_directories(subject_dir(subject_id), ec);
    if (ec) fail(Errc::STORE_UNAVAILABLE, "store " + name_ + ": " + ec.message());
    // Write-then-rename so a torn write never leaves a half item behind.
    std::string final_path = item_path(subject_id, item_id);
    std::string tmp_path = final_path + ".tmp";
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) fail(Errc::STORE_UNAVAILABLE, "store " + name_ + ": cannot write " + tmp_path);
        out << envelope::encode(value) << '\n';
        if (!out.flush()) fail(Errc::STORE_UNAVAILABLE, "store " + name_ + ": write failed");
    }
    fs::rename(tmp_path, final_path, ec);
    if (ec) fail(Errc::STORE_UNAVAILABLE, "store " + name_ + ": " + ec.message());
}

std::optional<envelope::Value> FileStore::get(const std::string& subject_id,
                                              const std::string& item_id) const {
    require_key(subject_id, "subject");
    require_key(item_id, "item");
    std::lock_guard lock(mutex_);
    std::ifstream in(item_path(subject_id, item_id), std::ios::binary);
    if (!in) return std::nullopt;
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return envelope::decode(text);
}

std::vector<std::string> FileStore::list_items(const std::string& subject_id) const {
    require_key(subject_id, "subject");
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(subject_dir(subject_id), ec)) {
        std::string stem = entry.path().filename().string();
        if (stem.size() > 5 && stem.ends_with(".json"))
            out.push_back(stem.substr(0, stem.size() - 5));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> FileStore::subjects() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root_, ec))
        if (entry.is_directory()) out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

bool FileStore::remove(const std::string& subject_id, const std::string& item_id) {
    require_key(subject_id, "subject");
    require_key(item_id, "item");
    std::lock_guard lock(mutex_);
    std::error_code ec;
    bool erased = fs::remove(item_path(subject_id, item_id), ec);
    if (ec) fail(Errc::STORE_UNAVAILABLE, "store " + name_ + ": " + ec.message());
    fs::remove(subject_dir(subject_id), ec); // only succeeds when now empty
    return erased;
}

std::size_t FileStore::erase_subject(const std::string& subject_id) {
    require_key(subject_id, "subject");
    std::lock_guard lock(mutex_);
    std::error_code ec;
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(subject_dir(subject_id), ec))
        if (entry.is_regular_file()) ++files;
    fs::remove_all(subject_dir(subject_id), ec);
    if (ec) fail(Errc::STORE_UNAVAILABLE, "store " + name_ + ": " + ec.message());
    return files;
}

} // namespace swarmbus

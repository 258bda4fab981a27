#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "swarmbus/envelope.hpp"

namespace swarmbus {

/// Result of commanding one erasure target.
struct ErasureOutcome {
    std::string target_name;
    std::size_t items_deleted = 0;
    std::vector<std::string> cancelled_instances; // bus target only
    std::vector<std::string> residual_findings;   // problems hit during the pass
};

/// Anything that can hold a subject's values: stores, the bus (instances,
/// escrow, adapter-side caches), the consent registry.
class ErasureTarget {
public:
    virtual ~ErasureTarget() = default;
    virtual std::string erasure_target_name() const = 0;
    /// Deletes everything held for the subject. Throws STORE_UNAVAILABLE
    /// when the target cannot be reached; idempotent otherwise.
    virtual ErasureOutcome erase_subject_data(const std::string& subject_id) = 0;
    /// Brute-force walk over everything this target holds; returns a
    /// human-readable ref per item still tied to the subject (by key or by
    /// byte content). Empty means clean.
    virtual std::vector<std::string> residual_scan(const std::string& subject_id) const = 0;
};

/// Named collection of envelope values keyed (subjectId, itemId). The
/// durable backend is one directory per store with one subdirectory per
/// subject, so erasure is a subtree removal.
class SubjectStore : public ErasureTarget {
public:
    virtual std::string name() const = 0;
    virtual void put(const std::string& subject_id, const std::string& item_id,
                     const envelope::Value& value) = 0;
    virtual std::optional<envelope::Value> get(const std::string& subject_id,
                                               const std::string& item_id) const = 0;
    virtual std::vector<std::string> list_items(const std::string& subject_id) const = 0;
    virtual std::vector<std::string> subjects() const = 0;
    virtual bool remove(const std::string& subject_id, const std::string& item_id) = 0;
    virtual std::size_t erase_subject(const std::string& subject_id) = 0;

    std::string erasure_target_name() const override { return name(); }
    ErasureOutcome erase_subject_data(const std::string& subject_id) override;
    std::vector<std::string> residual_scan(const std::string& subject_id) const override;
};

/// Keys become path components in the durable backend; both backends
/// enforce the same alphabet so data round-trips between them.
bool is_store_key(const std::string& key);

class MemoryStore final : public SubjectStore {
public:
    explicit MemoryStore(std::string name) : name_(std::move(name)) {}

    std::string name() const override { return name_; }
    void put(const std::string& subject_id, const std::string& item_id,
             const envelope::Value& value) override;
    std::optional<envelope::Value> get(const std::string& subject_id,
                                       const std::string& item_id) const override;
    std::vector<std::string> list_items(const std::string& subject_id) const override;
    std::vector<std::string> subjects() const override;
    bool remove(const std::string& subject_id, const std::string& item_id) override;
    std::size_t erase_subject(const std::string& subject_id) override;

private:
    std::string name_;
    mutable std::mutex mutex_;
    std::map<std::string, std::map<std::string, envelope::Value>> items_;
};

/// Layout: <root>/<subject_id>/<item_id>.json, each file one canonical
/// envelope plus a trailing newline.
class FileStore final : public SubjectStore {
public:
    FileStore(std::string root_dir, std::string name);

    std::string name() const override { return name_; }
    void put(const std::string& subject_id, const std::string& item_id,
             const envelope::Value& value) override;
    std::optional<envelope::Value> get(const std::string& subject_id,
                                       const std::string& item_id) const override;
    std::vector<std::string> list_items(const std::string& subject_id) const override;
    std::vector<std::string> subjects() const override;
    bool remove(const std::string& subject_id, const std::string& item_id) override;
    std::size_t erase_subject(const std::string& subject_id) override;

    const std::string& root() const { return root_; }

private:
    std::string subject_dir(const std::string& subject_id) const;
    std::string item_path(const std::string& subject_id, const std::string& item_id) const;

    std::string root_;
    std::string name_;
    mutable std::mutex mutex_;
};

} // namespace swarmbus

#pragma once

// Brute-force set-associative cache used as an oracle: each set is a list
// ordered MRU first, victims taken from the back.

#include <cstdint>
#include <list>
#include <optional>
#include <vector>

namespace cxlsim_test {

class ReferenceCache {
 public:
  struct Outcome {
    bool hit = false;
    std::optional<std::uint64_t> evicted;
    bool evicted_dirty = false;
    bool operator==(const Outcome&) const = default;
  };

  ReferenceCache(std::uint64_t sets, std::uint32_t ways) : sets_(sets), ways_(ways) {}

  Outcome access(std::uint64_t page, bool write) {
    auto& set = sets_[page % sets_.size()];
    Outcome out;
    for (auto it = set.begin(); it != set.end(); ++it) {
      if (it->page == page) {
        Entry e = *it;
        set.erase(it);
        e.dirty = e.dirty || write;
        set.push_front(e);
        out.hit = true;
        return out;
      }
    }
    if (set.size() == ways_) {
      out.evicted = set.back().page;
      out.evicted_dirty = set.back().dirty;
      set.pop_back();
    }
    set.push_front({page, write});
    return out;
  }

  bool resident(std::uint64_t page) const {
    for (const auto& e : sets_[page % sets_.size()])
      if (e.page == page) return true;
    return false;
  }

 private:
  struct Entry {
    std::uint64_t page;
    bool dirty;
  };
  std::vector<std::list<Entry>> sets_;
  std::uint32_t ways_;
};

}  // namespace cxlsim_test

#pragma once

#include <algorithm>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace storychat {

using Payload = std::shared_ptr<const std::string>;

class Subscriber {
public:
    virtual ~Subscriber() = default;
    /// Must not block; called from the pipeline thread.
    virtual void deliver(const Payload& payload) = 0;
};

/// Fan-out point. The pipeline publishes in order; each subscriber keeps its
/// own queue, so one slow client never holds up the rest.
class BroadcastHub {
public:
    void add(const std::shared_ptr<Subscriber>& s)
    {
        std::lock_guard lock(mutex_);
        subscribers_.push_back(s);
    }

    void remove(const Subscriber* s)
    {
        std::lock_guard lock(mutex_);
        std::erase_if(subscribers_, [s](const auto& w) {
            auto p = w.lock();
            return !p || p.get() == s;
        });
    }

    void publish(const Payload& payload)
    {
        std::vector<std::shared_ptr<Subscriber>> live;
        {
            std::lock_guard lock(mutex_);
            live.reserve(subscribers_.size());
            std::erase_if(subscribers_, [&](const auto& w) {
                auto p = w.lock();
                if (!p) return true;
                live.push_back(std::move(p));
                return false;
            });
        }
        for (auto& s : live) s->deliver(payload);
    }

    std::size_t size() const
    {
        std::lock_guard lock(mutex_);
        return subscribers_.size();
    }

private:
    mutable std::mutex mutex_;
    std::vector<std::weak_ptr<Subscriber>> subscribers_;
};

}  // namespace storychat

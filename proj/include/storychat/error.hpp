#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace storychat {

enum class Errc {
    MalformedFrame,
    OversizedLine,
    SourceClosed,
    InvalidConfig,
    InvalidValue,
    EmptyVocabulary,
    EmptyNotice,
    EmptyBody,
    Unauthenticated,
    StorageFull,
    SequenceGap,
    CorruptRecord,
    MissingManifest,
    OverlayIdMismatch,
    NotWithStory,
    NoSuchEvent,
    MissingOverlay,
};

constexpr std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::MalformedFrame: return "MalformedFrame";
    case Errc::OversizedLine: return "OversizedLine";
    case Errc::SourceClosed: return "SourceClosed";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::EmptyVocabulary: return "EmptyVocabulary";
    case Errc::EmptyNotice: return "EmptyNotice";
    case Errc::EmptyBody: return "EmptyBody";
    case Errc::Unauthenticated: return "Unauthenticated";
    case Errc::StorageFull: return "StorageFull";
    case Errc::SequenceGap: return "SequenceGap";
    case Errc::CorruptRecord: return "CorruptRecord";
    case Errc::MissingManifest: return "MissingManifest";
    case Errc::OverlayIdMismatch: return "OverlayIdMismatch";
    case Errc::NotWithStory: return "NotWithStory";
    case Errc::NoSuchEvent: return "NoSuchEvent";
    case Errc::MissingOverlay: return "MissingOverlay";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace storychat

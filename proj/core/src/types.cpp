#include "ttm/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ttm/error.hpp"

namespace ttm {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::UnknownMember: return "UnknownMember";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::EmptyToken: return "EmptyToken";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::WeightsMissing: return "WeightsMissing";
    case Errc::OddDim: return "OddDim";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteWeights: return "NonFiniteWeights";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::Io: return "Io";
    case Errc::NoOpenElection: return "NoOpenElection";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::CorruptLog: return "CorruptLog";
    case Errc::MalformedEnvelope: return "MalformedEnvelope";
    case Errc::NotJoined: return "NotJoined";
    case Errc::RoomFull: return "RoomFull";
  }
  return "Unknown";
}

MemberId::MemberId(std::string value) : value_(std::move(value)) {
  if (value_.empty()) throw Error(Errc::InvalidArgument, "member id must be nonempty");
}

void AtmosphereWindow::push(double value) {
  if (!(value >= -1.0 && value <= 1.0)) {
    throw Error(Errc::OutOfRange, "atmosphere value outside [-1, 1]");
  }
  std::shift_left(values_.begin(), values_.end(), 1);
  values_.back() = value;
}

double AtmosphereWindow::mean() const noexcept {
  return std::accumulate(values_.begin(), values_.end(), 0.0) /
         static_cast<double>(values_.size());
}

void ResourceLedger::add(const MemberId& member, MemberResources resources) {
  entries_.insert_or_assign(member, resources);
}

void ResourceLedger::remove(const MemberId& member) {
  if (entries_.erase(member) == 0) throw Error(Errc::UnknownMember, member.str());
}

bool ResourceLedger::contains(const MemberId& member) const {
  return entries_.find(member) != entries_.end();
}

const MemberResources& ResourceLedger::at(const MemberId& member) const {
  auto it = entries_.find(member);
  if (it == entries_.end()) throw Error(Errc::UnknownMember, member.str());
  return it->second;
}

MemberResources& ResourceLedger::at(const MemberId& member) {
  auto it = entries_.find(member);
  if (it == entries_.end()) throw Error(Errc::UnknownMember, member.str());
  return it->second;
}

double ResourceLedger::total_budget() const noexcept {
  double total = 0.0;
  for (const auto& [_, r] : entries_) total += r.budget;
  return total;
}

ResourceStructure resource_structure(const ResourceLedger& ledger, const MemberId& actor) {
  const double count = ledger.at(actor).budget;
  const double total = ledger.total_budget();
  const double proportion = total > 0.0 ? std::clamp(count / total, 0.0, 1.0) : 0.0;
  return {count, proportion};
}

bool Field::has_member(const MemberId& member) const {
  return std::find(tribe.begin(), tribe.end(), member) != tribe.end();
}

}  // namespace ttm

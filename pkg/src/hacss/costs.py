"""Process-unit prices for every server action."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class CostTable:
    header_inspect: int = 1
    drop: int = 1  # t_d: drop decided from the clear header alone
    open_body: int = 3
    stamp_check: int = 5  # t_c: full stamp verification
    siv_validate: int = 10
    blacklist_probe: int = 1  # per list entry compared
    plan_packet: int = 2  # per designed outbound packet or reply
    scan_kb: int = 1  # per started KiB of assembled content

    def problems(self) -> list[str]:
        out = [f"costs.{f.name} must be > 0" for f in fields(self) if getattr(self, f.name) <= 0]
        if self.drop >= self.stamp_check:
            out.append("costs.drop must be < costs.stamp_check (t_d < t_c)")
        return out

    def scan(self, size: int) -> int:
        return self.scan_kb * -(-size // 1024)

    def to_dict(self) -> dict[str, int]:
        return asdict(self)

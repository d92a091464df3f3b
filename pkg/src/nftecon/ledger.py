"""In-memory token and NFT accounting.

Fungible tokens (the governance token and one CP token per NFT group) are
plain balance maps.  Burning a fungible token means transferring it to the
zero address; burning an NFT reassigns it to the zero address and flags it.
Supply counters are maintained incrementally and can be cross-checked with
:meth:`Ledger.recount`, a full scan of the stored state.

Every mutating method validates all of its preconditions before touching
state, so a raised :class:`LedgerError` leaves the ledger unchanged.

Snapshot format (``Ledger.snapshot`` / ``Ledger.from_snapshot``), a JSON
object with keys:

``tokens``
    ``{token_id: {"minted": str, "balances": {account_hex: str}}}`` with
    amounts as 18-digit decimal strings.
``groups``
    ``{group_id: {"max_rarity": int, "minted": int, "burned": int}}``
``nfts``
    list of ``{"nft_id", "group", "rarity_index", "owner", "burned"}``
``cells``
    list of ``{"group", "rarity_index", "circulating"}``
``next_nft_id``
    int
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterator

from .fixedpoint import TokenAmount


class LedgerError(Exception):
    pass


class UnknownTokenError(LedgerError):
    pass


class UnknownGroupError(LedgerError):
    pass


class UnknownNftError(LedgerError):
    pass


class InsufficientBalanceError(LedgerError):
    pass


class ZeroAddressError(LedgerError):
    pass


class NotOwnerError(LedgerError):
    pass


class AlreadyBurnedError(LedgerError):
    pass


class RarityOutOfRangeError(LedgerError):
    pass


@dataclass(frozen=True, order=True)
class AccountId:
    """Opaque 20-byte account identifier."""

    raw: bytes

    def __post_init__(self) -> None:
        if len(self.raw) != 20:
            raise ValueError("account ids are exactly 20 bytes")

    @classmethod
    def from_label(cls, label: str) -> "AccountId":
        """Deterministic id for a named actor (never the zero address)."""
        digest = hashlib.sha256(label.encode()).digest()[:20]
        if digest == bytes(20):  # pragma: no cover - astronomically unlikely
            raise ValueError("label hashes to the zero address")
        return cls(digest)

    @classmethod
    def from_hex(cls, text: str) -> "AccountId":
        return cls(bytes.fromhex(text.removeprefix("0x")))

    @property
    def hex(self) -> str:
        return "0x" + self.raw.hex()

    @property
    def is_zero(self) -> bool:
        return self.raw == bytes(20)

    def __str__(self) -> str:
        return self.hex

    def __repr__(self) -> str:
        return f"AccountId({self.hex})"


ZERO_ADDRESS = AccountId(bytes(20))


@dataclass(frozen=True)
class NftRecord:
    nft_id: int
    group: str
    rarity_index: int
    owner: AccountId
    burned: bool = False


class Ledger:
    """Balances, NFT registry and supply counters for one simulation run."""

    def __init__(self) -> None:
        self._balances: dict[str, dict[AccountId, int]] = {}
        self._minted: dict[str, int] = {}
        self._max_rarity: dict[str, int] = {}
        self._group_minted: dict[str, int] = {}
        self._group_burned: dict[str, int] = {}
        self._cells: dict[tuple[str, int], int] = {}
        self._nfts: dict[int, NftRecord] = {}
        self._owned: dict[AccountId, set[int]] = defaultdict(set)
        self._next_nft_id = 1

    # -- registration --------------------------------------------------

    def register_token(self, token: str) -> None:
        if token in self._balances:
            raise LedgerError(f"token {token!r} already registered")
        self._balances[token] = {}
        self._minted[token] = 0

    def register_group(self, group: str, max_rarity: int) -> None:
        if group in self._max_rarity:
            raise LedgerError(f"group {group!r} already registered")
        if max_rarity < 0:
            raise ValueError("max_rarity must be non-negative")
        self._max_rarity[group] = max_rarity
        self._group_minted[group] = 0
        self._group_burned[group] = 0
        for i in range(max_rarity + 1):
            self._cells[(group, i)] = 0

    @property
    def tokens(self) -> list[str]:
        return list(self._balances)

    @property
    def groups(self) -> list[str]:
        return list(self._max_rarity)

    def max_rarity(self, group: str) -> int:
        self._require_group(group)
        return self._max_rarity[group]

    # -- fungible tokens -----------------------------------------------

    def _require_token(self, token: str) -> dict[AccountId, int]:
        try:
            return self._balances[token]
        except KeyError:
            raise UnknownTokenError(f"unknown token {token!r}") from None

    def _require_group(self, group: str) -> None:
        if group not in self._max_rarity:
            raise UnknownGroupError(f"unknown group {group!r}")

    def balance(self, token: str, account: AccountId) -> TokenAmount:
        return TokenAmount(self._require_token(token).get(account, 0))

    def mint_tokens(self, token: str, to: AccountId, amount: TokenAmount) -> None:
        balances = self._require_token(token)
        if to.is_zero:
            raise ZeroAddressError("cannot mint to the zero address")
        new_total = TokenAmount(self._minted[token] + amount.units)  # overflow check
        balances[to] = balances.get(to, 0) + amount.units
        self._minted[token] = new_total.units

    def transfer_tokens(
        self, token: str, src: AccountId, dst: AccountId, amount: TokenAmount
    ) -> None:
        """Move ``amount`` from ``src`` to ``dst``; ``dst`` may be the zero address (burn)."""
        balances = self._require_token(token)
        if src.is_zero:
            raise ZeroAddressError("transfers from the zero address are forbidden")
        have = balances.get(src, 0)
        if have < amount.units:
            raise InsufficientBalanceError(
                f"{src} holds {TokenAmount(have)} {token}, needs {amount}"
            )
        if not amount:
            return
        balances[src] = have - amount.units
        balances[dst] = balances.get(dst, 0) + amount.units

    def total_minted(self, token: str) -> TokenAmount:
        self._require_token(token)
        return TokenAmount(self._minted[token])

    def burned_tokens(self, token: str) -> TokenAmount:
        return self.balance(token, ZERO_ADDRESS)

    def holders(self, token: str) -> Iterator[tuple[AccountId, TokenAmount]]:
        for account, units in self._require_token(token).items():
            yield account, TokenAmount(units)

    # -- NFTs -------------------------------------------------------------

    def nft(self, nft_id: int) -> NftRecord:
        try:
            return self._nfts[nft_id]
        except KeyError:
            raise UnknownNftError(f"unknown nft {nft_id}") from None

    def nfts_of(self, owner: AccountId, group: str | None = None) -> list[NftRecord]:
        """Unburned NFTs held by ``owner``, ordered by id."""
        records = (self._nfts[i] for i in sorted(self._owned.get(owner, ())))
        return [r for r in records if group is None or r.group == group]

    def iter_nfts(self) -> Iterator[NftRecord]:
        yield from self._nfts.values()

    def mint_nft(self, group: str, to: AccountId, rarity: int = 0) -> int:
        self._require_group(group)
        if not 0 <= rarity <= self._max_rarity[group]:
            raise RarityOutOfRangeError(
                f"rarity {rarity} outside 0..{self._max_rarity[group]} for group {group!r}"
            )
        if to.is_zero:
            raise ZeroAddressError("cannot mint an NFT to the zero address")
        nft_id = self._next_nft_id
        self._next_nft_id += 1
        self._nfts[nft_id] = NftRecord(nft_id, group, rarity, to)
        self._owned[to].add(nft_id)
        self._cells[(group, rarity)] += 1
        self._group_minted[group] += 1
        return nft_id

    def _check_owned(self, nft_id: int, caller: AccountId) -> NftRecord:
        record = self.nft(nft_id)
        if record.burned:
            raise AlreadyBurnedError(f"nft {nft_id} is already burned")
        if record.owner != caller:
            raise NotOwnerError(f"{caller} does not own nft {nft_id}")
        return record

    def check_burnable(self, nft_id: int, caller: AccountId) -> NftRecord:
        return self._check_owned(nft_id, caller)

    def burn_nft(self, nft_id: int, caller: AccountId) -> None:
        record = self._check_owned(nft_id, caller)
        self._nfts[nft_id] = replace(record, owner=ZERO_ADDRESS, burned=True)
        self._owned[caller].discard(nft_id)
        self._cells[(record.group, record.rarity_index)] -= 1
        self._group_burned[record.group] += 1

    def transfer_nft(self, nft_id: int, caller: AccountId, to: AccountId) -> None:
        record = self._check_owned(nft_id, caller)
        if to.is_zero:
            self.burn_nft(nft_id, caller)
            return
        self._nfts[nft_id] = replace(record, owner=to)
        self._owned[caller].discard(nft_id)
        self._owned[to].add(nft_id)

    def upgrade_nft(self, nft_id: int, caller: AccountId) -> int:
        """Move an NFT one rarity level up; returns the new level."""
        record = self._check_owned(nft_id, caller)
        new_rarity = record.rarity_index + 1
        if new_rarity > self._max_rarity[record.group]:
            raise RarityOutOfRangeError(f"nft {nft_id} is already at the top of its ladder")
        self._nfts[nft_id] = replace(record, rarity_index=new_rarity)
        self._cells[(record.group, record.rarity_index)] -= 1
        self._cells[(record.group, new_rarity)] += 1
        return new_rarity

    # -- counters ---------------------------------------------------------

    def circulating_supply(self, key: str | tuple[str, int]) -> TokenAmount | int:
        """Circulating amount of a token, or NFT count of a ``(group, rarity)`` cell."""
        if isinstance(key, tuple):
            group, rarity = key
            self._require_group(group)
            if (group, rarity) not in self._cells:
                raise RarityOutOfRangeError(f"no rarity {rarity} in group {group!r}")
            return self._cells[(group, rarity)]
        self._require_token(key)
        return TokenAmount(self._minted[key] - self._balances[key].get(ZERO_ADDRESS, 0))

    def nft_circulating(self, group: str, rarity: int | None = None) -> int:
        self._require_group(group)
        if rarity is None:
            return sum(self._cells[(group, i)] for i in range(self._max_rarity[group] + 1))
        return self.circulating_supply((group, rarity))  # type: ignore[return-value]

    def nft_minted(self, group: str) -> int:
        self._require_group(group)
        return self._group_minted[group]

    def nft_burned(self, group: str) -> int:
        self._require_group(group)
        return self._group_burned[group]

    def counters(self) -> dict:
        """Incrementally maintained counters, in the same layout as :meth:`recount`."""
        return {
            "cells": dict(self._cells),
            "group_minted": dict(self._group_minted),
            "group_burned": dict(self._group_burned),
            "token_circulating": {
                t: self._minted[t] - self._balances[t].get(ZERO_ADDRESS, 0)
                for t in self._balances
            },
        }

    def recount(self) -> dict:
        """Recompute every counter by scanning balances and NFT records."""
        cells = {(g, i): 0 for g, top in self._max_rarity.items() for i in range(top + 1)}
        minted = {g: 0 for g in self._max_rarity}
        burned = {g: 0 for g in self._max_rarity}
        for record in self._nfts.values():
            minted[record.group] += 1
            if record.burned:
                burned[record.group] += 1
            else:
                cells[(record.group, record.rarity_index)] += 1
        circulating = {
            t: sum(u for a, u in bal.items() if not a.is_zero)
            for t, bal in self._balances.items()
        }
        return {
            "cells": cells,
            "group_minted": minted,
            "group_burned": burned,
            "token_circulating": circulating,
        }

    def check_invariants(self) -> None:
        """Raise AssertionError if any conservation or counter invariant is broken."""
        for token, balances in self._balances.items():
            total = sum(balances.values())
            assert total == self._minted[token], f"{token}: balances {total} != minted"
        assert self.counters() == self.recount(), "counters diverged from full scan"
        for record in self._nfts.values():
            if record.burned:
                assert record.owner.is_zero, f"burned nft {record.nft_id} has an owner"
            assert record.rarity_index <= self._max_rarity[record.group]

    # -- snapshots --------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "tokens": {
                token: {
                    "minted": str(TokenAmount(self._minted[token])),
                    "balances": {
                        a.hex: str(TokenAmount(u)) for a, u in sorted(bal.items())
                    },
                }
                for token, bal in sorted(self._balances.items())
            },
            "groups": {
                g: {
                    "max_rarity": self._max_rarity[g],
                    "minted": self._group_minted[g],
                    "burned": self._group_burned[g],
                }
                for g in sorted(self._max_rarity)
            },
            "nfts": [
                {
                    "nft_id": r.nft_id,
                    "group": r.group,
                    "rarity_index": r.rarity_index,
                    "owner": r.owner.hex,
                    "burned": r.burned,
                }
                for r in sorted(self._nfts.values(), key=lambda r: r.nft_id)
            ],
            "cells": [
                {"group": g, "rarity_index": i, "circulating": n}
                for (g, i), n in sorted(self._cells.items())
            ],
            "next_nft_id": self._next_nft_id,
        }

    def dumps(self) -> str:
        return json.dumps(self.snapshot(), indent=2, sort_keys=True)

    @classmethod
    def from_snapshot(cls, data: dict) -> "Ledger":
        ledger = cls()
        for token, info in data["tokens"].items():
            ledger.register_token(token)
            ledger._minted[token] = TokenAmount.of(info["minted"]).units
            ledger._balances[token] = {
                AccountId.from_hex(a): TokenAmount.of(v).units
                for a, v in info["balances"].items()
            }
        for group, info in data["groups"].items():
            ledger.register_group(group, info["max_rarity"])
            ledger._group_minted[group] = info["minted"]
            ledger._group_burned[group] = info["burned"]
        for item in data["nfts"]:
            record = NftRecord(
                item["nft_id"],
                item["group"],
                item["rarity_index"],
                AccountId.from_hex(item["owner"]),
                item["burned"],
            )
            ledger._nfts[record.nft_id] = record
            if not record.burned:
                ledger._owned[record.owner].add(record.nft_id)
        for cell in data["cells"]:
            ledger._cells[(cell["group"], cell["rarity_index"])] = cell["circulating"]
        ledger._next_nft_id = data["next_nft_id"]
        return ledger

    @classmethod
    def loads(cls, text: str) -> "Ledger":
        return cls.from_snapshot(json.loads(text))

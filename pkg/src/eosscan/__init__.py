"""eosscan: static vulnerability analysis for EOSIO Wasm smart contracts."""

__version__ = "0.1.0"

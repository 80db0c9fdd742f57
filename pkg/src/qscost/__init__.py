"""Symbol-comparison costs of QuickSelect: sources, runs, limit law and expectations."""
from .algo import RunRecord, SeedArray, run_quickquant, run_quickselect_random_pivot, run_quickval
from .cost import KeyCost, PositionalCost, PositionIndicator, SymbolCost, parse_cost
from .expectation import (ExpectationResult, L_fn, expected_key_closed, expected_quickrand,
                          expected_S_integral, expected_S_series)
from .limit import TruncationPolicy, sample_dickman, sample_S, sample_S_many
from .source import Intermittent, Markov, Memoryless, bernoulli, parse_source, uniform_binary

__version__ = "0.1.0"

from typing import Any, Callable

import networkx as nx

from defectsynth.data_model import BaseComponent
from defectsynth.exceptions import InvalidInputError


class Stage(BaseComponent):
    """Interface for one experiment stage."""

    name: str
    run: Callable[[Any], None]
    requires: list[str] = []


class StageGraph:
    """Dependency graph of experiment stages.

    Internally, stages are stored on the nodes of a networkx DiGraph with an
    edge from every requirement to the stage needing it.

    Examples
    --------

    >>> graph = StageGraph()
    >>> graph.add_stage(Stage(name="corpus", run=make_corpus))
    >>> graph.add_stage(Stage(name="translator", run=train, requires=["corpus"]))
    >>> [stage.name for stage in graph.ordered()]
    ['corpus', 'translator']
    """

    stage_data_ppty = "stage_data"

    def __init__(self):
        self._graph = nx.DiGraph()

    def add_stage(self, stage: Stage):
        """Adds a stage after all of its requirements.

        Raises
        ------

        InvalidInputError
            If the stage exists already or a requirement is unknown.
        """
        if self._graph.has_node(stage.name):
            msg = f"Stage {stage.name!r} already exists in the graph."
            raise InvalidInputError(msg)
        unknown = [name for name in stage.requires if not self._graph.has_node(name)]
        if unknown:
            msg = f"Stage {stage.name!r} requires unknown stages {unknown}"
            raise InvalidInputError(msg)
        self._graph.add_node(stage.name, **{self.stage_data_ppty: stage})
        self._graph.add_edges_from((name, stage.name) for name in stage.requires)

    def get_stage(self, name: str) -> Stage:
        if not self._graph.has_node(name):
            msg = f"Stage {name!r} does not exist."
            raise InvalidInputError(msg)
        return self._graph.nodes[name][self.stage_data_ppty]

    def names(self) -> list[str]:
        return list(self._graph.nodes)

    def required_for(self, targets: list[str]) -> "StageGraph":
        """Subgraph holding `targets` and everything they depend on."""
        keep = set()
        for target in targets:
            self.get_stage(target)
            keep |= nx.ancestors(self._graph, target) | {target}
        pruned = StageGraph()
        pruned._graph = nx.DiGraph(self._graph.subgraph(keep))
        return pruned

    def ordered(self) -> list[Stage]:
        """Stages in topological order, ties broken by name."""
        return [
            self.get_stage(name) for name in nx.lexicographical_topological_sort(self._graph)
        ]

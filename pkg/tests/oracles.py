"""Independent reference implementations used to cross-check analyses.

These deliberately use the slowest, most literal algorithms available:
change impact runs a fixpoint sweep over a flat edge list, and circuit
enumeration does an exhaustive simple-path search. They share nothing with
the package's graph code beyond the metamodel itself.

The relation edge table (who produces/consumes/calls/hosts what, and with
which label per traversal direction) is written out longhand here from the
model, so a disagreement with the package points at a real bug rather than
a shared helper.
"""

from __future__ import annotations

from a4c import model as m


def display_task(agent: str, task: str) -> str:
    return f"{agent}.{task}"


def display_body_node(agent: str, task: str, node_id: str) -> str:
    return f"{agent}.{task}/{node_id}"


def display_store(agent: str, store: str) -> str:
    return f"{agent}.{store}"


def display_flow(flow: m.ContextFlow, occurrence: int) -> str:
    return f"flow {flow.source}->{flow.target}#{occurrence}"


def display_link(link: m.DeploymentLink, occurrence: int) -> str:
    return f"link {link.source}->{link.target}#{occurrence}"


def default_llm_name(model: m.Model) -> str | None:
    for llm in model.llms:
        if llm.default:
            return llm.name
    return None


def oracle_edges(model: m.Model) -> list[tuple[str, str, str, str]]:
    """Flat (u, v, label_down, label_up) list of the impact relation."""
    edges: list[tuple[str, str, str, str]] = []
    default_llm = default_llm_name(model)

    for agent in model.agents:
        llm = agent.llm if agent.llm is not None else default_llm
        if llm is not None:
            edges.append((llm, agent.name, "Consumes", "Consumes"))
        store_artifacts = {s.name: s.artifact for s in agent.datastores}
        for task in agent.tasks:
            tq = display_task(agent.name, task.name)
            edges.append((agent.name, tq, "Hosts", "Hosts"))

            produced = set(task.outputs)
            consumed = set(task.inputs)
            if task.graph is not None:
                for node in task.graph.nodes:
                    if isinstance(node, m.InvokeNode):
                        produced.update(node.outputs)
                        consumed.update(node.inputs)
                        edges.append((node.tool, tq, "Consumes", "Consumes"))
                    elif isinstance(node, m.CallNode):
                        callee_agent = node.agent if node.agent is not None else agent.name
                        callee = display_task(callee_agent, node.task)
                        edges.append((tq, callee, "Calls", "CalledBy"))
                    elif isinstance(node, m.DecisionNode):
                        dq = display_body_node(agent.name, task.name, node.id)
                        edges.append((node.subject, dq, "Gates", "Gates"))
                        edges.append((dq, node.subject, "Gates", "Gates"))
                for edge in task.graph.edges:
                    if edge.kind is m.EdgeKind.STORE_WRITE:
                        store = m.store_name_of(edge.target)
                        if store in store_artifacts:
                            sq = display_store(agent.name, store)
                            edges.append((tq, sq, "Produces", "Produces"))
                    elif edge.kind is m.EdgeKind.STORE_READ:
                        store = m.store_name_of(edge.source)
                        if store in store_artifacts:
                            sq = display_store(agent.name, store)
                            edges.append((sq, tq, "Consumes", "Consumes"))
            for art in sorted(produced):
                edges.append((tq, art, "Produces", "Produces"))
            for art in sorted(consumed):
                edges.append((art, tq, "Consumes", "Consumes"))
    return edges


def closure(edges: list[tuple[str, str, str, str]], seed: str, direction: str) -> set[str]:
    """Naive fixpoint over a flat edge list; returns displays, seed excluded."""
    members = {seed}
    changed = True
    while changed:
        changed = False
        for u, v, _dl, _ul in edges:
            if direction in ("down", "both") and u in members and v not in members:
                members.add(v)
                changed = True
            if direction in ("up", "both") and v in members and u not in members:
                members.add(u)
                changed = True
    return members - {seed}


def oracle_affected_set(model: m.Model, seed: str, direction: str) -> set[str]:
    return closure(oracle_edges(model), seed, direction)


def oracle_decorations(model: m.Model, affected: set[str]) -> dict[str, str]:
    """C1 flows, C2 links, and C2 nodes pulled in by already-affected elements."""
    decorations: dict[str, str] = {}
    flow_counts: dict[tuple[str, str], int] = {}
    if model.context is not None:
        for flow in model.context.flows:
            key = (flow.source, flow.target)
            occ = flow_counts.get(key, 0)
            flow_counts[key] = occ + 1
            if any(a in affected for a in flow.artifacts):
                decorations[display_flow(flow, occ)] = "FlowsOver"
    link_counts: dict[tuple[str, str], int] = {}
    if model.deployment is not None:
        for node in model.deployment.nodes:
            if any(h in affected for h in node.hosts):
                decorations[node.name] = "Hosts"
        for link in model.deployment.links:
            key = (link.source, link.target)
            occ = link_counts.get(key, 0)
            link_counts[key] = occ + 1
            if any(a in affected for a in link.artifacts):
                decorations[display_link(link, occ)] = "FlowsOver"
    return decorations


def oracle_levels(model: m.Model, seed: str, affected: set[str]) -> set[str]:
    levels: set[str] = set()
    level_by_element = element_levels(model)
    for elem in affected:
        lvl = level_by_element.get(elem)
        if lvl is not None:
            levels.add(lvl)
    # flows and links mentioning the seed itself touch their level even
    # when nothing else is affected
    if model.context is not None:
        for flow in model.context.flows:
            if seed in flow.artifacts or seed in (flow.source, flow.target):
                levels.add("C1")
    if model.deployment is not None:
        for link in model.deployment.links:
            if seed in link.artifacts:
                levels.add("C2")
    return levels


def element_levels(model: m.Model) -> dict[str, str]:
    """Display name -> C-level; artifacts carry no level of their own."""
    levels: dict[str, str] = {}
    if model.context is not None:
        for actor in model.context.actors:
            levels[actor.name] = "C1"
        counts: dict[tuple[str, str], int] = {}
        for flow in model.context.flows:
            key = (flow.source, flow.target)
            occ = counts.get(key, 0)
            counts[key] = occ + 1
            levels[display_flow(flow, occ)] = "C1"
    for llm in model.llms:
        levels[llm.name] = "C1"
    for tool in model.tools:
        levels[tool.name] = "C1"
    if model.deployment is not None:
        for node in model.deployment.nodes:
            levels[node.name] = "C2"
        counts = {}
        for link in model.deployment.links:
            key = (link.source, link.target)
            occ = counts.get(key, 0)
            counts[key] = occ + 1
            levels[display_link(link, occ)] = "C2"
    for agent in model.agents:
        levels[agent.name] = "C3"
        for store in agent.datastores:
            levels[display_store(agent.name, store.name)] = "C3"
        for task in agent.tasks:
            task_level = "C3" if task.is_composite else "C4"
            levels[display_task(agent.name, task.name)] = task_level
            if task.graph is not None:
                for node in task.graph.nodes:
                    if isinstance(node, (m.InitialNode, m.FinalNode, m.StoreNode)):
                        continue
                    levels[display_body_node(agent.name, task.name, node.id)] = task_level
    return levels


def oracle_cycles(graph: m.ActivityGraph) -> set[tuple[str, ...]]:
    """Every elementary control-flow circuit, canonicalized to its smallest
    rotation, found by exhaustive simple-path search."""
    adjacency: dict[str, set[str]] = {}
    for edge in graph.edges:
        if edge.kind is m.EdgeKind.CONTROL:
            adjacency.setdefault(edge.source, set()).add(edge.target)

    cycles: set[tuple[str, ...]] = set()
    vertices = sorted(adjacency)

    def search(origin: str, current: str, path: list[str]) -> None:
        for nxt in sorted(adjacency.get(current, ())):
            if nxt == origin:
                cycles.add(canonical_cycle(tuple(path)))
            elif nxt not in path and nxt > origin:
                path.append(nxt)
                search(origin, nxt, path)
                path.pop()

    for v in vertices:
        search(v, v, [v])
    return cycles


def canonical_cycle(cycle: tuple[str, ...]) -> tuple[str, ...]:
    """Rotate so the smallest node id comes first."""
    k = cycle.index(min(cycle))
    return cycle[k:] + cycle[:k]


def oracle_guarded_exits(graph: m.ActivityGraph, cycle: tuple[str, ...]) -> set[tuple[str, str]]:
    members = set(cycle)
    exits: set[tuple[str, str]] = set()
    for edge in graph.edges:
        if edge.kind is m.EdgeKind.CONTROL and edge.guard is not None:
            if edge.source in members and edge.target not in members:
                exits.add((edge.source, edge.target))
    return exits

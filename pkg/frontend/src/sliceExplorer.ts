// Faceted exploration of the impact sample. The filter is a stack of
// clauses (breadcrumbs): drilling into a group pushes a clause, clicking
// a breadcrumb pops back to it. The exploration state round-trips
// through the URL hash so a drill-down path is shareable.

import { ApiClient, Metric, SliceResult } from './api.js';
import {
    FilterClause,
    SliceQuery,
    fromQueryString,
    serializeClause,
    toQueryString,
} from './sliceQuery.js';

export interface ExplorerState {
    query: SliceQuery;
    result: SliceResult | null;
    error: string | null;
    loading: boolean;
}

export class SliceExplorer {
    private state: ExplorerState = {
        query: { filter: [], groupBy: '', metric: 'jd' },
        result: null,
        error: null,
        loading: false,
    };

    constructor(
        private readonly api: ApiClient,
        private readonly onChange: (state: ExplorerState) => void = () => {}
    ) {}

    view(): ExplorerState {
        return this.state;
    }

    toUrlHash(): string {
        return toQueryString(this.state.query);
    }

    async loadFromUrlHash(hash: string): Promise<void> {
        this.state.query = fromQueryString(hash.replace(/^#/, ''));
        await this.refresh();
    }

    async refresh(): Promise<void> {
        this.state.loading = true;
        this.state.error = null;
        this.onChange(this.state);
        try {
            this.state.result = await this.api.getSlice(toQueryString(this.state.query));
        } catch (error) {
            this.state.error = String(error);
            this.state.result = null;
        }
        this.state.loading = false;
        this.onChange(this.state);
    }

    async setGroupBy(attribute: string): Promise<void> {
        this.state.query.groupBy = attribute;
        await this.refresh();
    }

    async setMetric(metric: Metric): Promise<void> {
        this.state.query.metric = metric;
        await this.refresh();
    }

    async addClause(clause: FilterClause): Promise<void> {
        this.state.query.filter.push(clause);
        await this.refresh();
    }

    /** Drill into a group row: the group value becomes an equality clause. */
    async drillDown(groupValue: string): Promise<void> {
        const attribute = this.state.query.groupBy;
        if (!attribute) {
            return;
        }
        this.state.query.groupBy = '';
        await this.addClause({ kind: 'equals', name: attribute, value: groupValue });
    }

    /** Pop the filter stack back to (and including) `depth` clauses. */
    async popTo(depth: number): Promise<void> {
        this.state.query.filter = this.state.query.filter.slice(0, Math.max(depth, 0));
        await this.refresh();
    }
}

// ---- rendering (plain HTML strings; no client-side metric math) ----------

const fmt = (x: number) => x.toPrecision(6);

export function renderSliceTable(result: SliceResult): string {
    const note = result.insufficient
        ? '<p class="flag">No sampled items match this slice.</p>'
        : '';
    const kind = result.exhaustive ? 'exact' : 'estimated';
    return `
    <table class="metrics">
      <tr><th>weight share</th><th>split rate</th><th>merge rate</th><th>jaccard distance</th><th>items</th></tr>
      <tr>
        <td>${fmt(result.weight)}</td>
        <td>${fmt(result.split_rate)}</td>
        <td>${fmt(result.merge_rate)}</td>
        <td>${fmt(result.jaccard_distance)}</td>
        <td>${result.count}</td>
      </tr>
    </table>
    <p class="note">${kind} contributions of the slice to the overall metrics</p>
    ${note}`;
}

export function renderBreadcrumbs(filter: FilterClause[]): string {
    const crumbs = filter
        .map(
            (clause, index) =>
                `<a href="#" class="crumb" data-depth="${index + 1}">${escapeHtml(
                    serializeClause(clause)
                )}</a>`
        )
        .join(' &rsaquo; ');
    return `<a href="#" class="crumb" data-depth="0">all items</a>${
        crumbs ? ' &rsaquo; ' + crumbs : ''
    }`;
}

export function renderGroups(result: SliceResult, metric: Metric): string {
    if (result.groups.length === 0) {
        return '';
    }
    const key =
        metric === 'split' ? 'split_rate' : metric === 'merge' ? 'merge_rate' : 'jaccard_distance';
    const rows = result.groups
        .map(
            (group) => `
      <tr class="group-row" data-value="${escapeHtml(group.value)}">
        <td>${escapeHtml(group.value)}</td>
        <td>${fmt(group.weight)}</td>
        <td>${fmt(group[key as keyof typeof group] as number)}</td>
        <td>${group.count}</td>
        <td><span class="bar" style="width:${barWidth(group, result, key)}px"></span></td>
      </tr>`
        )
        .join('');
    return `
    <table class="groups">
      <tr><th>group</th><th>weight share</th><th>${key}</th><th>items</th><th></th></tr>
      ${rows}
    </table>`;
}

function barWidth(group: GroupLike, result: SliceResult, key: string): number {
    const top = Math.max(
        ...result.groups.map((g) => Math.abs(g[key as keyof typeof g] as number)),
        1e-12
    );
    return Math.round((Math.abs(group[key as keyof typeof group] as number) / top) * 160);
}

type GroupLike = SliceResult['groups'][number];

export function renderExamples(result: SliceResult): string {
    if (result.examples.length === 0) {
        return '';
    }
    const rows = result.examples
        .map(
            (example) => `
      <tr>
        <td>${escapeHtml(example.item_id)}</td>
        <td>${fmt(example.importance_weight)}</td>
        <td>${fmt(example.jaccard_distance)}</td>
        <td class="attrs">${escapeHtml(JSON.stringify(example.attributes))}</td>
      </tr>`
        )
        .join('');
    return `
    <table class="examples">
      <tr><th>example item</th><th>importance</th><th>jd</th><th>attributes</th></tr>
      ${rows}
    </table>`;
}

export function escapeHtml(text: string): string {
    return text
        .replace(/&/g, '&amp;')
        .replace(/</g, '&lt;')
        .replace(/>/g, '&gt;')
        .replace(/"/g, '&quot;');
}

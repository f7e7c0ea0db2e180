// Slice queries: a conjunction of attribute predicates plus optional
// grouping. Serialization must match the service's filter grammar
// exactly: comma-separated clauses, each `name=value`, `name>=n`,
// `name<=n`, `name>n`, `name<n`, or a bare flag name.

import type { Metric } from './api.js';

export type RangeOp = '>=' | '<=' | '>' | '<';

export type FilterClause =
    | { kind: 'equals'; name: string; value: string | number | boolean }
    | { kind: 'range'; name: string; op: RangeOp; value: number }
    | { kind: 'flag'; name: string };

export interface SliceQuery {
    filter: FilterClause[];
    groupBy: string;
    metric: Metric;
}

export function serializeClause(clause: FilterClause): string {
    switch (clause.kind) {
        case 'equals':
            return `${clause.name}=${clause.value}`;
        case 'range':
            return `${clause.name}${clause.op}${clause.value}`;
        case 'flag':
            return clause.name;
    }
}

export function serializeFilter(clauses: FilterClause[]): string {
    return clauses.map(serializeClause).join(',');
}

export function parseClause(raw: string): FilterClause | null {
    const text = raw.trim();
    if (!text) {
        return null;
    }
    for (const op of ['>=', '<=', '=', '>', '<'] as const) {
        const index = text.indexOf(op);
        if (index > 0) {
            const name = text.slice(0, index).trim();
            const value = text.slice(index + op.length).trim();
            if (op === '=') {
                return { kind: 'equals', name, value: parseScalar(value) };
            }
            const numeric = Number(value);
            if (Number.isNaN(numeric)) {
                return null;
            }
            return { kind: 'range', name, op, value: numeric };
        }
    }
    return { kind: 'flag', name: text };
}

export function parseFilter(expression: string): FilterClause[] {
    const clauses: FilterClause[] = [];
    for (const raw of expression.split(',')) {
        const clause = parseClause(raw);
        if (clause) {
            clauses.push(clause);
        }
    }
    return clauses;
}

function parseScalar(text: string): string | number | boolean {
    if (text.toLowerCase() === 'true') return true;
    if (text.toLowerCase() === 'false') return false;
    const numeric = Number(text);
    return text !== '' && !Number.isNaN(numeric) ? numeric : text;
}

export function toQueryString(query: SliceQuery): string {
    const params = new URLSearchParams();
    if (query.filter.length > 0) {
        params.set('filter', serializeFilter(query.filter));
    }
    if (query.groupBy) {
        params.set('group_by', query.groupBy);
    }
    params.set('metric', query.metric);
    return params.toString();
}

export function fromQueryString(queryString: string): SliceQuery {
    const params = new URLSearchParams(queryString);
    const metric = params.get('metric');
    return {
        filter: parseFilter(params.get('filter') ?? ''),
        groupBy: params.get('group_by') ?? '',
        metric: metric === 'split' || metric === 'merge' ? metric : 'jd',
    };
}

// Typed client for the evaluation service. The UI never recomputes
// metrics: every displayed number comes from these responses.

export type Metric = 'jd' | 'split' | 'merge';
export type Verdict = 'equivalent' | 'not_equivalent' | 'unavailable';

export interface Estimate {
    estimate: number;
    std_err: number | null;
    n_effective: number;
}

export interface DeltaPrecision extends Estimate {
    ci95: [number, number] | null;
}

export interface QualityReport {
    delta_precision: DeltaPrecision;
    good_split: Estimate | null;
    bad_split: Estimate | null;
    good_merge: Estimate | null;
    bad_merge: Estimate | null;
    category_totals: Record<string, number>;
    counts: { judged_pairs: number; by_class: Record<string, number> };
    judgement_collection?: {
        unknown_tasks: number;
        overwritten: number;
        judged: number;
        dropped: number;
        classes: Record<string, Record<string, number>>;
    } | null;
}

export interface GroupRow {
    value: string;
    weight: number;
    split_rate: number;
    merge_rate: number;
    jaccard_distance: number;
    count: number;
}

export interface ExampleItem {
    item_id: string;
    importance_weight: number;
    split_rate: number;
    merge_rate: number;
    jaccard_distance: number;
    attributes: Record<string, unknown>;
}

export interface SliceResult {
    weight: number;
    split_rate: number;
    merge_rate: number;
    jaccard_distance: number;
    count: number;
    insufficient: boolean;
    exhaustive: boolean;
    groups: GroupRow[];
    examples: ExampleItem[];
}

export interface ImpactReport {
    overall: { split_rate: number; merge_rate: number; jaccard_distance: number };
    most_affected: Array<{
        cluster_id: string;
        side: 'base' | 'exp';
        cluster_weight: number;
        jaccard_distance: number;
        contribution: number;
    }>;
    affected_weight_fraction: number;
    affected_count: number;
    item_count: number;
    total_weight: number;
}

export interface ItemPanel {
    item_id: string;
    attributes: Record<string, unknown>;
}

export interface Task {
    task_id: string;
    item_a: ItemPanel;
    item_b: ItemPanel;
    remaining: number;
}

export interface JudgementReceipt {
    accepted: boolean;
    replaced: boolean;
    judged_count: number;
    remaining: number;
}

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

async function expectOk(response: Response): Promise<Response> {
    if (!response.ok) {
        const text = await response.text().catch(() => '');
        throw new ApiError(response.status, `${response.status}: ${text}`);
    }
    return response;
}

export class ApiClient {
    constructor(private readonly baseUrl: string = '') {}

    async getImpact(): Promise<ImpactReport> {
        const response = await expectOk(await fetch(`${this.baseUrl}/api/impact`));
        return response.json();
    }

    async getSlice(query: string): Promise<SliceResult> {
        const suffix = query ? `?${query}` : '';
        const response = await expectOk(await fetch(`${this.baseUrl}/api/slice${suffix}`));
        return response.json();
    }

    async nextTask(): Promise<Task | null> {
        const response = await fetch(`${this.baseUrl}/api/tasks/next`);
        if (response.status === 204) {
            return null;
        }
        await expectOk(response);
        return response.json();
    }

    async postJudgement(taskId: string, verdict: Verdict): Promise<JudgementReceipt> {
        const response = await expectOk(
            await fetch(`${this.baseUrl}/api/judgements`, {
                method: 'POST',
                headers: { 'Content-Type': 'application/json' },
                body: JSON.stringify({ task_id: taskId, verdict }),
            })
        );
        return response.json();
    }

    async getQuality(): Promise<QualityReport> {
        const response = await expectOk(await fetch(`${this.baseUrl}/api/quality`));
        return response.json();
    }
}

// Pair-by-pair judgement flow: fetch the next blinded task, submit a
// verdict, refresh the live quality estimates. Failed submissions are
// queued and retried before the next one; counts are updated
// optimistically and reconciled against server receipts.

import { ApiClient, QualityReport, Task, Verdict } from './api.js';
import { escapeHtml } from './sliceExplorer.js';

export type ConsolePhase = 'idle' | 'judging' | 'done' | 'error';

export interface ConsoleState {
    phase: ConsolePhase;
    task: Task | null;
    remaining: number;
    judgedCount: number;
    quality: QualityReport | null;
    pendingRetries: number;
    error: string | null;
}

interface QueuedVerdict {
    taskId: string;
    verdict: Verdict;
}

export class JudgementConsole {
    private state: ConsoleState = {
        phase: 'idle',
        task: null,
        remaining: 0,
        judgedCount: 0,
        quality: null,
        pendingRetries: 0,
        error: null,
    };
    private retryQueue: QueuedVerdict[] = [];

    constructor(
        private readonly api: ApiClient,
        private readonly onChange: (state: ConsoleState) => void = () => {}
    ) {}

    view(): ConsoleState {
        return this.state;
    }

    async start(): Promise<void> {
        await this.refreshQuality();
        await this.advance();
    }

    /** Submit a verdict for the task currently on screen. */
    async submit(verdict: Verdict): Promise<void> {
        const task = this.state.task;
        if (!task) {
            return;
        }
        this.state.judgedCount += 1; // optimistic; reconciled below
        await this.flushRetries();
        try {
            const receipt = await this.api.postJudgement(task.task_id, verdict);
            this.state.judgedCount = receipt.judged_count;
            this.state.remaining = receipt.remaining;
        } catch (error) {
            this.retryQueue.push({ taskId: task.task_id, verdict });
            this.state.pendingRetries = this.retryQueue.length;
        }
        await this.refreshQuality();
        await this.advance();
    }

    async flushRetries(): Promise<void> {
        while (this.retryQueue.length > 0) {
            const queued = this.retryQueue[0];
            try {
                const receipt = await this.api.postJudgement(queued.taskId, queued.verdict);
                this.state.judgedCount = receipt.judged_count;
                this.state.remaining = receipt.remaining;
                this.retryQueue.shift();
            } catch (error) {
                break; // still unreachable; keep the queue for next time
            }
        }
        this.state.pendingRetries = this.retryQueue.length;
    }

    private async advance(): Promise<void> {
        try {
            const task = await this.api.nextTask();
            this.state.task = task;
            if (task === null) {
                this.state.phase = this.retryQueue.length > 0 ? 'error' : 'done';
                this.state.remaining = 0;
            } else {
                this.state.phase = 'judging';
                this.state.remaining = task.remaining;
            }
        } catch (error) {
            this.state.phase = 'error';
            this.state.error = String(error);
        }
        this.onChange(this.state);
    }

    private async refreshQuality(): Promise<void> {
        try {
            this.state.quality = await this.api.getQuality();
        } catch (error) {
            // Quality may be unavailable until pairs are sampled; keep going.
        }
        this.onChange(this.state);
    }
}

// ---- rendering ------------------------------------------------------------

const fmt = (x: number | null | undefined) =>
    x === null || x === undefined ? 'n/a' : x.toPrecision(6);

export function renderJudgementCard(task: Task): string {
    return `
    <div class="card" data-task="${escapeHtml(task.task_id)}">
      <div class="panels">
        ${renderItemPanel(task.item_a)}
        ${renderItemPanel(task.item_b)}
      </div>
      <p class="question">Are these two items equivalent?</p>
      <div class="verdicts">
        <button data-verdict="equivalent">equivalent</button>
        <button data-verdict="not_equivalent">not equivalent</button>
        <button data-verdict="unavailable">can't judge</button>
      </div>
      <p class="remaining">${task.remaining} task(s) remaining</p>
    </div>`;
}

function renderItemPanel(item: { item_id: string; attributes: Record<string, unknown> }): string {
    const rows = Object.entries(item.attributes)
        .map(
            ([name, value]) =>
                `<tr><td>${escapeHtml(name)}</td><td>${escapeHtml(String(value))}</td></tr>`
        )
        .join('');
    return `
    <div class="panel">
      <h4>${escapeHtml(item.item_id)}</h4>
      <table class="attrs">${rows || '<tr><td colspan="2">(no attributes)</td></tr>'}</table>
    </div>`;
}

export function renderQualityPanel(quality: QualityReport | null): string {
    if (quality === null) {
        return '<p class="note">No quality estimates yet.</p>';
    }
    const delta = quality.delta_precision;
    const interval = delta.ci95
        ? ` &nbsp; 95% CI [${fmt(delta.ci95[0])}, ${fmt(delta.ci95[1])}]`
        : '';
    const rate = (label: string, estimate: { estimate: number; std_err: number | null } | null) =>
        `<tr><td>${label}</td><td>${estimate ? fmt(estimate.estimate) : 'unavailable'}</td>` +
        `<td>${estimate ? fmt(estimate.std_err) : ''}</td></tr>`;
    return `
    <div class="quality">
      <p class="delta">&Delta;precision: <b id="delta-precision">${fmt(delta.estimate)}</b>
         &plusmn; ${fmt(delta.std_err)}${interval}</p>
      <table class="rates">
        <tr><th>rate</th><th>estimate</th><th>std err</th></tr>
        ${rate('good split', quality.good_split)}
        ${rate('bad split', quality.bad_split)}
        ${rate('good merge', quality.good_merge)}
        ${rate('bad merge', quality.bad_merge)}
      </table>
      <p class="note">${quality.counts.judged_pairs} judged pair(s) in the estimate</p>
    </div>`;
}

export function renderDoneState(judgedCount: number): string {
    return `<div class="done"><p>All tasks judged (${judgedCount} verdicts recorded).</p></div>`;
}

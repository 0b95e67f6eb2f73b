"""Regenerates transcript.json for the countdown-timer fixture."""
import json
from pathlib import Path

PKG = "app/src/main/java/com/example/timer"
steps = []


def reply(content, calls=(), prompt=1200, completion=300):
    steps.append({
        "response": {
            "content": content,
            "tool_invocations": [
                {"invocation_id": f"call-{len(steps) + 1}-{i + 1}", "tool_name": name, "arguments": args}
                for i, (name, args) in enumerate(calls)
            ],
            "usage": {"prompt": prompt, "completion": completion},
        }
    })


def structured(intro, doc, **kw):
    reply(intro + "\n\n```json\n" + json.dumps(doc, indent=2) + "\n```", **kw)


workflows = [
    ("Create a Timer", "Name a timer and set its duration in minutes and seconds."),
    ("List Timers", "See every timer with its remaining time on the home screen."),
    ("Delete a Timer", "Remove a timer that is no longer needed."),
    ("Start a Timer", "Start a timer and watch it count down every second."),
    ("Pause a Timer", "Pause a running timer."),
    ("Resume a Timer", "Continue a paused timer from where it stopped."),
    ("Reset a Timer", "Return a timer to its full duration."),
    ("Completion Alert", "Play a sound and show a notification when a timer reaches zero."),
    ("Alert Settings", "Choose whether the alert plays a sound, vibrates, or both."),
]
structured("Here is the requirement document.", {
    "app_summary": "A countdown timer app for managing several named timers with alerts.",
    "workflows": [
        {"id": f"WF-{i + 1}", "name": n, "description": d} for i, (n, d) in enumerate(workflows)
    ],
})

structured("Overall design for the timer app.", {
    "components": [
        {"id": "UI-1", "name": "Timer List Page", "kind": "page", "parent_page": None,
         "description": "Home screen listing all timers."},
        {"id": "UI-2", "name": "Timer Editor Page", "kind": "page", "parent_page": None,
         "description": "Form for a new timer's name and duration."},
        {"id": "UI-3", "name": "Countdown Page", "kind": "page", "parent_page": None,
         "description": "Shows one running timer."},
        {"id": "UI-4", "name": "Timer Row", "kind": "component", "parent_page": "UI-1",
         "description": "Name and remaining time of one timer, with a delete action."},
        {"id": "UI-5", "name": "Control Bar", "kind": "component", "parent_page": "UI-3",
         "description": "Start, pause, resume and reset buttons."},
        {"id": "UI-6", "name": "Settings Page", "kind": "page", "parent_page": None,
         "description": "Alert preferences."},
    ],
    "entities": [
        {"id": "DM-1", "name": "Timer", "description": "A named countdown.",
         "attributes": [
             {"name": "id", "type": "identifier", "default": None},
             {"name": "name", "type": "text", "default": None},
             {"name": "duration_seconds", "type": "duration", "default": "60"},
             {"name": "remaining_seconds", "type": "duration", "default": "60"},
             {"name": "state", "type": "enum(idle,running,paused,finished)", "default": "idle"},
         ]},
        {"id": "DM-2", "name": "AlertSettings", "description": "How finished timers alert.",
         "attributes": [
             {"name": "sound", "type": "flag", "default": "true"},
             {"name": "vibrate", "type": "flag", "default": "false"},
         ]},
    ],
})

features = [
    ("Create a Timer", 0, ["Duration must be positive", "Name defaults to 'Timer'"],
     "UI-1 -> UI-2 form -> save -> UI-1", "New DM-1 stored with remaining = duration",
     ["UI-1", "UI-2"], ["DM-1"]),
    ("List Timers", 1, ["Timers are ordered by creation"], "UI-1 shows one UI-4 per timer",
     "Read all DM-1", ["UI-1", "UI-4"], ["DM-1"]),
    ("Delete a Timer", 2, ["Running timers stop before deletion"], "Delete action on UI-4",
     "Remove DM-1", ["UI-4"], ["DM-1"]),
    ("Start a Timer", 3, ["Only idle or paused timers start"], "UI-4 tap -> UI-3, start on UI-5",
     "DM-1 state running, remaining decreases each second", ["UI-3", "UI-5"], ["DM-1"]),
    ("Pause a Timer", 4, ["Only running timers pause"], "Pause on UI-5",
     "DM-1 state paused", ["UI-5"], ["DM-1"]),
    ("Resume a Timer", 5, ["Resumes from the stored remaining time"], "Resume on UI-5",
     "DM-1 state running", ["UI-5"], ["DM-1"]),
    ("Reset a Timer", 6, ["Reset stops the timer"], "Reset on UI-5",
     "DM-1 remaining = duration, state idle", ["UI-5"], ["DM-1"]),
    ("Completion Alert", 7, ["Alert once per finish"], "Notification when UI-3 reaches zero",
     "DM-1 state finished; read DM-2", ["UI-3"], ["DM-1", "DM-2"]),
    ("Alert Settings", 8, ["At least one of sound or vibrate stays on"], "UI-6 toggles",
     "Update DM-2", ["UI-6"], ["DM-2"]),
]
deps = [
    ("F-1", "F-2", "business", "Listing needs timers to exist"),
    ("F-2", "F-3", "technical", "Delete acts on a listed row"),
    ("F-1", "F-4", "business", "Only created timers can start"),
    ("F-4", "F-5", "business", "Only running timers pause"),
    ("F-5", "F-6", "business", "Only paused timers resume"),
    ("F-4", "F-7", "technical", "Reset uses the countdown controller"),
    ("F-4", "F-8", "technical", "The alert fires from the countdown"),
    ("F-8", "F-9", "business", "Settings configure the alert"),
]
structured("Features and their dependencies.", {
    "features": [
        {"id": f"F-{i + 1}", "name": n, "business_workflow": workflows[wf][1], "business_rules": rules,
         "ui_flow": ui, "data_flow": data, "contained_ui_ids": uis, "contained_data_ids": dms}
        for i, (n, wf, rules, ui, data, uis, dms) in enumerate(features)
    ],
    "dependencies": [
        {"prerequisite": a, "dependent": b, "kind": k, "rationale": r} for a, b, k, r in deps
    ],
})

structured("Three sets, built one after another.", {
    "sets": [
        {"id": "FS-1", "member_ids": ["F-1", "F-2", "F-3"]},
        {"id": "FS-2", "member_ids": ["F-4", "F-5", "F-6", "F-7"]},
        {"id": "FS-3", "member_ids": ["F-8", "F-9"]},
    ],
    "edges": [["FS-1", "FS-2"], ["FS-2", "FS-3"]],
})

# FS-1: timer management
structured("Plan for timer management.", {
    "set_level_description": {
        "name": "Timer management", "business_workflow": "Create, list and delete timers.",
        "business_rules": ["Duration must be positive"], "ui_flow": "UI-1 <-> UI-2, rows are UI-4",
        "data_flow": "DM-1 kept in an in-memory repository",
        "contained_ui_ids": ["UI-1", "UI-2", "UI-4"], "contained_data_ids": ["DM-1"]},
    "design_increments": [
        {"target": "UI-1", "text": "Lists timers from TimerRepository; tapping a row opens UI-3."},
        {"target": "DM-1", "text": "Implemented as the Timer data class."},
    ],
    "tasks": [
        {"id": "T-1", "text": "Add the Timer data class."},
        {"id": "T-2", "text": "Add TimerRepository with create, list and delete."},
        {"id": "T-3", "text": "Show the timer list in MainActivity."},
    ],
})
TIMER_KT = """package com.example.timer

enum class TimerState { IDLE, RUNNING, PAUSED, FINISHED }

data class Timer(
    val id: Long,
    val name: String,
    val durationSeconds: Int,
    var remainingSeconds: Int = durationSeconds,
    var state: TimerState = TimerState.IDLE,
)
"""
REPO_KT = """package com.example.timer

object TimerRepository {
    private val timers = mutableListOf<Timer>()
    private var nextId = 1L

    fun create(name: String, durationSeconds: Int): Timer {
        require(durationSeconds > 0) { "duration must be positive" }
        val timer = Timer(nextId++, name.ifBlank { "Timer" }, durationSeconds)
        timers.add(timer)
        return timer
    }

    fun list(): List<Timer> = timers.toList()

    fun delete(id: Long) {
        timers.removeAll { it.id == id }
    }
}
"""
reply("I will add the data class and wire the list into MainActivity.", [
    ("create_file", {"path": f"{PKG}/Timer.kt", "content": TIMER_KT}),
    ("edit_file", {"path": f"{PKG}/MainActivity.kt",
                   "search": "        super.onCreate(savedInstanceState)\n",
                   "replace": "        super.onCreate(savedInstanceState)\n        val timers = TimerRepository.list()\n        title = \"Timers (${timers.size})\"\n"}),
])
reply("Now the repository.", [
    ("create_file", {"path": f"{PKG}/TimerRepository.kt", "content": REPO_KT}),
])
reply("All tasks for timer management are implemented. TIME_TO_END")

# FS-2: countdown control, with one build failure
structured("Plan for countdown control.", {
    "set_level_description": {
        "name": "Countdown control", "business_workflow": "Start, pause, resume and reset a timer.",
        "business_rules": ["Only idle or paused timers start", "Reset stops the timer"],
        "ui_flow": "UI-3 with UI-5 controls", "data_flow": "DM-1 state and remaining time change",
        "contained_ui_ids": ["UI-3", "UI-5"], "contained_data_ids": ["DM-1"]},
    "design_increments": [
        {"target": "UI-5", "text": "Buttons call CountdownController."},
        {"new_component": {"name": "Progress Ring", "kind": "component", "parent_page": "UI-3",
                           "description": "Circular progress of the remaining time."},
         "text": "Added for the countdown display."},
    ],
    "tasks": [
        {"id": "T-1", "text": "Add CountdownController with start, pause, resume, reset and tick."},
        {"id": "T-2", "text": "Make sure the project builds."},
    ],
})
CONTROLLER_KT = """package com.example.timer

class CountdownController(private val timer: Timer) {
    fun start() {
        if (timer.state == TimerState.IDLE || timer.state == TimerState.PAUSED) {
            timer.state = TimerState.RUNNING
        }
    }

    fun pause() {
        if (timer.state == TimerState.RUNNING) timer.state = TimerState.PAUSED
    }

    fun resume() = start()

    fun reset() {
        timer.remainingSeconds = timer.durationSeconds
        timer.state = unresolvedRef.IDLE
    }

    fun tick() {
        if (timer.state != TimerState.RUNNING) return
        timer.remainingSeconds -= 1
        if (timer.remainingSeconds <= 0) {
            timer.remainingSeconds = 0
            timer.state = TimerState.FINISHED
        }
    }
}
"""
reply("Adding the countdown controller.", [
    ("create_file", {"path": f"{PKG}/CountdownController.kt", "content": CONTROLLER_KT}),
])
reply("The controller covers start, pause, resume and reset. TIME_TO_END")
reply("The reset state reference is wrong; fixing it.", [
    ("edit_file", {"path": f"{PKG}/CountdownController.kt",
                   "search": "timer.state = unresolvedRef.IDLE",
                   "replace": "timer.state = TimerState.IDLE"}),
])

# FS-3: alerts
structured("Plan for alerts.", {
    "set_level_description": {
        "name": "Alerts", "business_workflow": "Alert when a timer finishes, configurable in settings.",
        "business_rules": ["At least one of sound or vibrate stays on"],
        "ui_flow": "UI-6 toggles; notification from UI-3", "data_flow": "DM-2 read on finish",
        "contained_ui_ids": ["UI-3", "UI-6"], "contained_data_ids": ["DM-1", "DM-2"]},
    "design_increments": [
        {"target": "DM-2", "text": "Implemented as AlertSettings with a guard keeping one channel on."},
    ],
    "tasks": [
        {"id": "T-1", "text": "Add AlertSettings."},
        {"id": "T-2", "text": "Fire the alert from CountdownController.tick when the timer finishes."},
    ],
})
SETTINGS_KT = """package com.example.timer

data class AlertSettings(val sound: Boolean = true, val vibrate: Boolean = false) {
    init {
        require(sound || vibrate) { "at least one alert channel must stay on" }
    }
}

object Alerts {
    var settings = AlertSettings()
    var fired = 0

    fun fire(timer: Timer) {
        fired += 1
    }
}
"""
reply("Adding settings and firing the alert on finish.", [
    ("create_file", {"path": f"{PKG}/AlertSettings.kt", "content": SETTINGS_KT}),
    ("read_file", {"path": f"{PKG}/CountdownController.kt"}),
    ("edit_file", {"path": f"{PKG}/CountdownController.kt",
                   "search": "            timer.state = TimerState.FINISHED\n",
                   "replace": "            timer.state = TimerState.FINISHED\n            Alerts.fire(timer)\n"}),
])
reply("Alerts are in place. TIME_TO_END")

out = Path(__file__).with_name("transcript.json")
out.write_text(json.dumps({"steps": steps}, indent=2) + "\n")
print(f"wrote {len(steps)} steps to {out}")
